// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any fail.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "disas/corpus.hpp"
#include "disas/eval.hpp"
#include "disas/render.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace disas;

namespace {

constexpr std::uint64_t kFirstSeed = 1;
constexpr std::size_t kCorpusSize = 20;
constexpr std::uint64_t kNoiseSeed = 42;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::vector<Sample>& corpus() {
  static const std::vector<Sample> samples = [] {
    std::vector<Sample> out;
    for (std::uint64_t i = 0; i < kCorpusSize; ++i) {
      out.push_back(generate_sample(kFirstSeed + i));
      validate_sample(out.back());
    }
    return out;
  }();
  return samples;
}

ConfusionCounts& operator+=(ConfusionCounts& a, const ConfusionCounts& b) {
  a.tp += b.tp;
  a.fp += b.fp;
  a.fn += b.fn;
  return a;
}

struct CorpusRun {
  ConfusionCounts all, junk;
  std::vector<std::string> listings;  // JSON per sample
};

CorpusRun run_corpus(const std::function<std::unique_ptr<Classifier>(const Sample&)>& make,
                     const EngineConfig& config = {}) {
  CorpusRun run;
  for (const Sample& s : corpus()) {
    auto cls = make(s);
    const FinalListing listing = run_pipeline(s.region, *cls, config);
    const auto table = score_table(predictions_from(listing), s.truth, s.region);
    run.all += table.all.counts;
    run.junk += table.junk.counts;
    run.listings.push_back(listing.to_json());
  }
  return run;
}

std::unique_ptr<Classifier> oracle_for(const Sample& s) {
  return std::make_unique<GroundTruthClassifier>(s.truth.instruction_starts);
}

Outcome oracle_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const CorpusRun run = run_corpus(oracle_for);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto all = report_from_counts(run.all);
  const auto junk = report_from_counts(run.junk);
  const bool pass = run.all.fp == 0 && all.recall >= 0.98 && junk.recall >= 0.95 && secs < 60.0;
  return {pass, fmt::format("All P={:.3f} R={:.4f}, Junk R={:.4f}, {} samples in {:.2f}s", all.precision,
                            all.recall, junk.recall, corpus().size(), secs)};
}

Outcome noise_monotonicity() {
  const CorpusRun oracle = run_corpus(oracle_for);
  std::vector<double> f1s;
  bool identical = false;
  for (double eps : {0.0, 0.05, 0.20}) {
    const CorpusRun run = run_corpus([eps](const Sample& s) {
      return std::make_unique<NoisyOracle>(s.truth.instruction_starts, eps, kNoiseSeed);
    });
    f1s.push_back(report_from_counts(run.junk).f1);
    if (eps == 0.0) identical = run.listings == oracle.listings;
  }
  const bool monotone = f1s[0] >= f1s[1] && f1s[1] >= f1s[2];
  return {monotone && identical,
          fmt::format("Junk F1 {:.4f} / {:.4f} / {:.4f} at eps 0 / 0.05 / 0.2; eps=0 {} the oracle", f1s[0],
                      f1s[1], f1s[2], identical ? "matches" : "differs from")};
}

Outcome interval_grouping() {
  std::size_t mismatches = 0;
  const std::vector<Interval> touching = {{0, 4}, {4, 6}};
  const bool adjacency = group_overlapping_intervals(touching).size() == 2 &&
                         test::union_find_groups(touching).size() == 2;
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto intervals = test::random_intervals(rng);
    if (group_overlapping_intervals(intervals) != test::union_find_groups(intervals)) ++mismatches;
  }
  return {adjacency && mismatches == 0,
          fmt::format("{} mismatches in 1000 instances; [(0,4),(4,6)] -> {} groups", mismatches,
                      group_overlapping_intervals(touching).size())};
}

Outcome reverse_decode_completeness() {
  std::mt19937_64 rng(99);
  std::size_t mismatches = 0, found = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> bytes(64);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    const Address base = 0x600000, end = base + bytes.size();
    std::vector<Address> got;
    for (const auto& insn : reverse_decode(bytes, base, end, {})) got.push_back(insn.address);
    found += got.size();
    if (got != test::brute_reverse(bytes, base, end, {})) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} mismatches in 1000 windows ({} instructions)", mismatches, found)};
}

Outcome initial_coverage() {
  std::size_t total = 0, recovered = 0;
  for (const Sample& s : corpus()) {
    const DisasmGraph g = initial_disassemble(s.region);
    std::set<Address> starts;
    for (const auto& [id, block] : g.blocks()) {
      for (const auto& insn : block.instructions) starts.insert(insn.address);
    }
    total += s.truth.instruction_starts.size();
    for (Address a : s.truth.instruction_starts) recovered += starts.contains(a);
  }
  const double share = static_cast<double>(recovered) / static_cast<double>(total);
  return {share >= 0.85, fmt::format("{:.2f}% of {} true starts present before any check", 100 * share, total)};
}

Outcome metric_arithmetic() {
  const double f1 = f1_score(0.57, 0.47);
  bool ok = std::abs(f1 - 0.52) <= 0.005;
  // TP=30 FP=10 FN=20: P=0.75, R=0.6, F1=2PR/(P+R).
  const auto r = report_from_counts({30, 10, 20});
  ok = ok && std::abs(r.precision - 0.75) < 1e-12 && std::abs(r.recall - 0.6) < 1e-12 &&
       std::abs(r.f1 - 2 * 0.75 * 0.6 / 1.35) < 1e-12;
  // A constructed region scored end to end: one hit, one miss, one overlap.
  CodeRegion region{0x1000, test::hex_bytes("b8 01 00 00 00 90 90 90 b8 02 00 00 00 90"), {0x1000}};
  GroundTruth truth{{0x1000, 0x1008, 0x100d}, {{0x1005, 0x1008}}, {0x1008}};
  const std::vector<PredictedInstruction> pred = {{0x1000, 5}, {0x1006, 1}, {0x1007, 3}};
  const auto all = score(pred, truth, region, Scope::All);
  const auto junk = score(pred, truth, region, Scope::Junk);
  ok = ok && all.counts.tp == 1 && all.counts.fp == 1 && all.counts.fn == 2 && junk.counts.tp == 0 &&
       junk.counts.fp == 1 && junk.counts.fn == 1;
  return {ok, fmt::format("F1(0.57, 0.47) = {:.4f}; All {}/{}/{}, Junk {}/{}/{} (tp/fp/fn)", f1, all.counts.tp,
                          all.counts.fp, all.counts.fn, junk.counts.tp, junk.counts.fp, junk.counts.fn)};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_graph(const DisasmGraph& g) {
  std::vector<Block> blocks;
  for (const auto& [id, b] : g.blocks()) blocks.push_back(b);
  return render_blocks(blocks, operand_references(blocks), {}, {}).text;
}

Outcome rendering_goldens() {
  const std::string dir = std::string(DISAS_TEST_DATA) + "/golden/";
  CodeImage image(test::kBase, test::opaque_call_bytes());
  DisasmGraph g = initial_disassemble(image, {test::kBase});
  const bool left = render_graph(g) == read_text(dir + "opaque_call_initial.txt");
  minimize_overlap(g);
  const bool right = render_graph(g) == read_text(dir + "opaque_call_minimized.txt");

  CodeRegion region{test::kBase, test::junk_infill_bytes(), {test::kBase}};
  GroundTruthClassifier oracle(test::junk_infill_truth());
  const std::string text = run_pipeline(region, oracle).text();
  const bool gaps = text.find("db 0x89\n") != std::string::npos && text.find("db 0xA9\n") != std::string::npos;
  return {left && right && gaps, fmt::format("before-minimize {}, after-minimize {}, gap bytes {}",
                                             left ? "match" : "differ", right ? "match" : "differ",
                                             gaps ? "db 0x89 / db 0xA9" : "missing")};
}

Outcome batching_transparency() {
  EngineConfig one;
  one.batch_size = 1;
  EngineConfig many;
  many.batch_size = 32;
  const bool same = run_corpus(oracle_for, one).listings == run_corpus(oracle_for, many).listings;
  return {same, fmt::format("M=1 and M=32 listings {} on {} samples", same ? "identical" : "differ",
                            corpus().size())};
}

Outcome dataset_emitters() {
  std::size_t lines = 0, entries = 0, bad = 0;
  for (const Sample& s : corpus()) {
    const std::string text = emit_mntp_text(s.region, s.truth, 7);
    const auto parsed = parse_mntp_text(text);
    lines += parsed.size();
    std::size_t insns = 0;
    for (const auto& l : parsed) insns += l.kind == MntpLineKind::Instruction;
    if (insns != s.truth.instruction_starts.size()) ++bad;

    const SupervisedRun run = emit_supervised_entries(s.region, s.truth);
    std::size_t labelled = 0;
    for (const auto& e : run.entries) {
      if (e.words.size() != e.labels.size()) ++bad;
      for (int label : e.labels) labelled += label != kLabelIgnored;
    }
    if (labelled != run.instructions_queried) ++bad;
    entries += run.entries.size();
  }
  return {bad == 0, fmt::format("{} MNTP lines parsed, {} supervised entries, {} inconsistencies", lines,
                                entries, bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"oracle end-to-end", oracle_end_to_end},
      {"noise monotonicity", noise_monotonicity},
      {"interval grouping equivalence", interval_grouping},
      {"reverse-decode completeness", reverse_decode_completeness},
      {"initial disassembly coverage", initial_coverage},
      {"metric arithmetic", metric_arithmetic},
      {"rendering goldens", rendering_goldens},
      {"batching transparency", batching_transparency},
      {"dataset emitters", dataset_emitters},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.pass;
    std::cout << fmt::format("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
  }
  std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
