#include "disas/eval.hpp"

#include <map>

#include <fmt/format.h>

namespace disas {

const char* to_string(Scope scope) { return scope == Scope::All ? "All" : "Junk"; }

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

ScoreReport report_from_counts(const ConfusionCounts& counts) {
  ScoreReport r;
  r.counts = counts;
  const std::size_t predicted = counts.tp + counts.fp;
  const std::size_t actual = counts.tp + counts.fn;
  r.precision_undefined = predicted == 0;
  r.recall_undefined = actual == 0;
  r.precision = predicted == 0 ? 0.0 : static_cast<double>(counts.tp) / static_cast<double>(predicted);
  r.recall = actual == 0 ? 0.0 : static_cast<double>(counts.tp) / static_cast<double>(actual);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

ScoreReport score(std::span<const PredictedInstruction> predicted, const GroundTruth& truth,
                  const CodeRegion& region, Scope scope) {
  const std::set<Address>& scoped =
      scope == Scope::All ? truth.instruction_starts : truth.first_after_junk;
  // Truth instructions never overlap one another, so start -> end is enough
  // to find the one candidate a span can touch.
  std::map<Address, Address> spans;
  for (Address a : scoped) {
    spans.emplace(a, decode_at(region.bytes, region.base, a - region.base).end());
  }

  std::set<Address> hit;
  ConfusionCounts counts;
  for (const auto& p : predicted) {
    if (truth.instruction_starts.contains(p.address)) {
      if (scoped.contains(p.address)) hit.insert(p.address);
      continue;
    }
    const Address end = p.address + p.length;
    auto it = spans.lower_bound(end);
    if (it == spans.begin()) continue;
    --it;
    if (it->second > p.address) ++counts.fp;
  }
  counts.tp = hit.size();
  counts.fn = scoped.size() - hit.size();
  return report_from_counts(counts);
}

std::vector<PredictedInstruction> predictions_from(const FinalListing& listing) {
  std::vector<PredictedInstruction> out;
  for (const auto& insn : listing.instructions) out.push_back({insn.address, insn.length});
  return out;
}

std::vector<PredictedInstruction> predictions_from(const std::vector<Address>& addresses,
                                                   const CodeRegion& region) {
  std::vector<PredictedInstruction> out;
  const Address end = region.base + region.bytes.size();
  for (Address a : addresses) {
    if (a < region.base || a >= end) {
      out.push_back({a, 1});
      continue;
    }
    out.push_back({a, decode_at(region.bytes, region.base, a - region.base).length});
  }
  return out;
}

ScoreTable score_table(std::span<const PredictedInstruction> predicted, const GroundTruth& truth,
                       const CodeRegion& region) {
  return {score(predicted, truth, region, Scope::All),
          score(predicted, truth, region, Scope::Junk)};
}

std::string format_table_text(const ScoreTable& table) {
  std::string out = fmt::format("{:<6}{:>10}{:>10}{:>10}\n", "", "Precision", "Recall", "F1");
  for (const auto& [name, r] : {std::pair{"All", &table.all}, std::pair{"Junk", &table.junk}}) {
    out += fmt::format("{:<6}{:>10.3f}{:>10.3f}{:>10.3f}\n", name, r->precision, r->recall, r->f1);
  }
  return out;
}

std::string format_table_csv(const ScoreTable& table) {
  std::string out = "Scope,Precision,Recall,F1\n";
  out += fmt::format("All,{:.4f},{:.4f},{:.4f}\n", table.all.precision, table.all.recall, table.all.f1);
  out += fmt::format("Junk,{:.4f},{:.4f},{:.4f}\n", table.junk.precision, table.junk.recall,
                     table.junk.f1);
  return out;
}

}  // namespace disas
