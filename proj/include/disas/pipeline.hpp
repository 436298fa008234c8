#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disas/classify.hpp"
#include "disas/context.hpp"
#include "disas/decode.hpp"
#include "disas/graph.hpp"
#include "disas/initial.hpp"

namespace disas {

/// Tunables of the checking and fixing passes.
struct EngineConfig {
  std::size_t window = 16;           // instructions checked at once by a prefilter request
  double hi = 0.95;                  // p above this commits "valid"
  double lo = 0.05;                  // p below this commits "invalid"
  double single_threshold = 0.5;     // single-instruction and reverse single-mode cutoff
  std::size_t bfs_limit = kDefaultContextLimit;
  std::size_t batch_size = 32;
  std::size_t max_fix_rounds = 8;

  /// Throws std::invalid_argument unless 0 <= lo < single_threshold < hi <= 1
  /// and every count is at least 1.
  void validate() const;
};

enum class Verdict : std::uint8_t { Pending, Valid, Invalid };

const char* to_string(Verdict verdict);

struct VerdictEntry {
  Verdict verdict = Verdict::Pending;
  double probability = 0.0;
  std::uint8_t length = 1;
};

/// Per-instruction verdicts. An entry may only move out of Pending; a
/// conflicting overwrite throws std::logic_error.
class VerdictStore {
 public:
  void decide(const Instruction& insn, Verdict verdict, double probability);

  Verdict verdict(Address a) const;
  const VerdictEntry* find(Address a) const;
  const std::map<Address, VerdictEntry>& entries() const { return entries_; }

  /// Start addresses of instructions known to be invalid.
  const std::set<Address>& invalid_starts() const { return invalid_; }

  std::size_t count(Verdict verdict) const;

 private:
  std::map<Address, VerdictEntry> entries_;
  std::set<Address> invalid_;
};

enum class RegionLabel : std::uint8_t { Valid, Invalid, Unidentified };

const char* to_string(RegionLabel label);

struct RegionRange {
  Address begin = 0;
  Address end = 0;
  RegionLabel label = RegionLabel::Unidentified;

  friend bool operator==(const RegionRange&, const RegionRange&) = default;
};

/// Ordered, disjoint ranges partitioning the code region.
using RegionMap = std::vector<RegionRange>;

struct FinalListing {
  std::vector<Instruction> instructions;  // valid instructions, ascending
  std::vector<std::pair<Address, std::uint8_t>> data_bytes;
  std::vector<Address> overlapping;  // valid instructions sharing bytes with another valid one

  /// Instruction lines interleaved with `db 0xNN` lines in address order.
  std::string text() const;

  /// {"instructions":[{"address","length","text"}],"data_bytes":[{"address","value"}]}
  std::string to_json() const;
};

struct PassStats {
  std::size_t prefilter_requests = 0;
  std::size_t single_requests = 0;
  std::size_t deleted_blocks = 0;
  std::size_t reverse_accepted = 0;
  std::size_t forward_accepted = 0;
  std::size_t fix_rounds = 0;
};

/// The checking and fixing engine over one code region.
///
/// Owns the disassembly graph and the verdicts; every classification goes
/// through per-stage batch queues that share one memo cache.
class Engine {
 public:
  Engine(const CodeImage& image, DisasmGraph graph, Classifier& classifier, EngineConfig config);

  /// Classifies windows of adjacent pending instructions, commits confident
  /// verdicts, deletes all-invalid blocks and re-minimizes overlap.
  void prefilter_pass();

  /// Classifies each remaining pending instruction on its own.
  void single_check_pass();

  RegionMap rebuild_regions() const;

  /// Drops invalid instructions starting in `region` from the graph, as the
  /// fixing passes expect.
  void clear_region(const RegionRange& region);

  /// Recovers the instruction chain ending at `right_valid_start` inside the
  /// invalid `region`. Returns accepted instructions in ascending order.
  std::vector<Instruction> reverse_infill(const RegionRange& region, Address right_valid_start);

  /// Scans `region` left to right for short valid blocks.
  std::vector<Block> forward_infill(const RegionRange& region);

  /// One fixing round over every invalid range between two valid ranges.
  /// Returns the number of instructions accepted.
  std::size_t fix_round();

  /// Full check-and-fix sequence; returns the final listing.
  FinalListing run();

  FinalListing final_listing() const;

  const DisasmGraph& graph() const { return graph_; }
  const VerdictStore& verdicts() const { return verdicts_; }
  const QueueStats& queue_stats() const { return queue_stats_; }
  const PassStats& pass_stats() const { return pass_stats_; }
  const EngineConfig& config() const { return config_; }

 private:
  struct ReverseState;
  struct ForwardState;

  BatchQueue& queue(const std::string& tag);
  void flush_all();

  ClassifyRequest build_request(const std::set<Address>& targets,
                                const std::vector<Instruction>& candidates,
                                const std::set<Address>& anchors, const std::string& tag) const;
  void adopt(const std::vector<Instruction>& accepted);
  std::set<Address> region_anchors(Address begin, Address end) const;

  void run_reverse(std::vector<ReverseState>& states);
  void run_forward(std::vector<ForwardState>& states);

  const CodeImage& image_;
  DisasmGraph graph_;
  Classifier& classifier_;
  EngineConfig config_;
  VerdictStore verdicts_;
  ClassificationCache cache_;
  QueueStats queue_stats_;
  PassStats pass_stats_;
  std::map<std::string, std::unique_ptr<BatchQueue>> queues_;
};

/// initial_disassemble followed by Engine::run.
FinalListing run_pipeline(const CodeRegion& region, Classifier& classifier,
                          const EngineConfig& config = {});

}  // namespace disas
