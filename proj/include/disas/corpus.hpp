#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "disas/classify.hpp"
#include "disas/graph.hpp"
#include "disas/initial.hpp"
#include "disas/pipeline.hpp"

namespace disas {

struct GroundTruth {
  std::set<Address> instruction_starts;
  std::vector<Interval> junk_ranges;  // sorted, disjoint, half-open
  std::set<Address> first_after_junk;
};

struct GenParams {
  std::size_t blocks = 50;
  std::size_t min_body = 3;  // instructions per block before the terminator
  std::size_t max_body = 9;
  std::size_t junk_min = 1;
  std::size_t junk_max = 15;
  double junk_probability = 0.9;  // per block that ends in jmp/ret
  double bogus_probability = 0.25;
  double immediate_ref_probability = 0.1;
  Address base = 0x401000;

  /// Throws std::invalid_argument on nonsensical parameters.
  void validate() const;
};

struct Sample {
  CodeRegion region;
  GroundTruth truth;
};

/// Synthesizes a region of x86-64 basic blocks with junk runs inserted after
/// blocks that never fall through. Some junk starts are targets of opaque
/// `cmp eax, eax; jne` branches. Deterministic in (seed, params).
Sample generate_sample(std::uint64_t seed, const GenParams& params = {});

/// Independent re-scan of a sample: decodes every truth start and checks that
/// instructions and junk ranges tile the region exactly. Throws
/// std::runtime_error describing the first inconsistency.
void validate_sample(const Sample& sample);

/// Writes `<dir>/<name>.bin` and `<dir>/<name>.json`.
void write_sample(const std::filesystem::path& dir, const std::string& name, const Sample& sample);

/// Reads a `.bin` / `.json` pair. Throws std::runtime_error on malformed input.
Sample read_sample(const std::filesystem::path& bin, const std::filesystem::path& meta);

// ---- masked-next-token-prediction text ----

enum class MntpLineKind : std::uint8_t { Blank, Label, ByteLine, Instruction, OffsetComment };

struct MntpLine {
  MntpLineKind kind = MntpLineKind::Blank;
  std::string text;  // the full line
  Address address = 0;       // Label
  std::uint8_t value = 0;    // ByteLine
  std::size_t offset = 0;    // OffsetComment
  std::string instruction;   // decoded text on ByteLine / Instruction / OffsetComment
  bool valid = false;
};

/// Walks the region in address order: each non-code byte becomes
/// `.byte 0xNN ; <decode> ; invalid`, each true instruction `<text> ; valid`
/// followed, if multibyte, by one `; offset k: <decode> ; invalid` line at a
/// seeded random interior offset. Referenced addresses get a `0xADDR:` label
/// preceded by a blank line.
std::string emit_mntp_text(const CodeRegion& region, const GroundTruth& truth, std::uint64_t seed);

/// Classifies every line; throws std::runtime_error on a line that fits none
/// of the forms above.
std::vector<MntpLine> parse_mntp_text(const std::string& text);

// ---- supervised token-classification entries ----

inline constexpr int kLabelValid = 1;
inline constexpr int kLabelInvalid = 0;
inline constexpr int kLabelIgnored = -100;

struct DatasetEntry {
  std::vector<std::string> words;  // concatenation reproduces the snippet text
  std::vector<int> labels;
};

/// Wraps the ground truth and records every request it answers as an entry.
class RecordingClassifier final : public Classifier {
 public:
  explicit RecordingClassifier(std::set<Address> truth);
  std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) override;

  const std::vector<DatasetEntry>& entries() const { return entries_; }

 private:
  GroundTruthClassifier inner_;
  std::set<Address> truth_;
  std::vector<DatasetEntry> entries_;
};

DatasetEntry split_request(const ClassifyRequest& request, const std::set<Address>& truth);

struct SupervisedRun {
  std::vector<DatasetEntry> entries;
  std::size_t instructions_queried = 0;  // as counted by the engine's queues
};

/// Full pipeline run with the ground truth standing in for the classifier.
SupervisedRun emit_supervised_entries(const CodeRegion& region, const GroundTruth& truth,
                                      const EngineConfig& config = {});

/// One JSON-lines record: {"words":[...],"labels":[...]}.
std::string entry_to_json(const DatasetEntry& entry);

}  // namespace disas
