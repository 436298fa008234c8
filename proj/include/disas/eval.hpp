#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disas/corpus.hpp"

namespace disas {

enum class Scope : std::uint8_t { All, Junk };

const char* to_string(Scope scope);

struct PredictedInstruction {
  Address address = 0;
  std::uint8_t length = 1;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ScoreReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  bool precision_undefined = false;  // TP + FP == 0, reported as 0
  bool recall_undefined = false;     // TP + FN == 0, reported as 0
};

/// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall);

/// Precision, recall and F1 from raw counts; 0/0 yields 0 with a flag.
ScoreReport report_from_counts(const ConfusionCounts& counts);

/// Scores predicted instructions against the ground truth.
///
/// TP: predicted starts that are truth starts. FN: truth starts not
/// predicted. FP: non-truth predictions whose bytes overlap a truth
/// instruction. The Junk scope restricts the truth side to the first
/// instruction after each junk range. Truth lengths are decoded from `region`.
ScoreReport score(std::span<const PredictedInstruction> predicted, const GroundTruth& truth,
                  const CodeRegion& region, Scope scope);

/// Predictions from a listing's valid instructions.
std::vector<PredictedInstruction> predictions_from(const FinalListing& listing);

/// Predictions from bare addresses; lengths are decoded from `region`.
std::vector<PredictedInstruction> predictions_from(const std::vector<Address>& addresses,
                                                   const CodeRegion& region);

struct ScoreTable {
  ScoreReport all;
  ScoreReport junk;
};

ScoreTable score_table(std::span<const PredictedInstruction> predicted, const GroundTruth& truth,
                       const CodeRegion& region);

/// Rows All / Junk, columns Precision / Recall / F1.
std::string format_table_text(const ScoreTable& table);

/// Header `Scope,Precision,Recall,F1` followed by the All and Junk rows.
std::string format_table_csv(const ScoreTable& table);

}  // namespace disas
