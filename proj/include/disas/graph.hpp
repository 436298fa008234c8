#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "disas/decode.hpp"

namespace disas {

/// Blocks are identified by their start address.
using BlockId = Address;

enum class EdgeKind : std::uint8_t {
  ControlFlow,
  ImmediateRef,
  FallthroughAfterBranch,
  SplitContinuation,
};

const char* to_string(EdgeKind kind);

struct Block {
  Address start = 0;
  std::vector<Instruction> instructions;

  Address end() const {
    return instructions.empty() ? start : instructions.back().end();
  }
};

/// A reference made by the instruction at `site` to `target`. It becomes an
/// edge once a block starts at `target`.
struct Reference {
  Address site = 0;
  Address target = 0;
  EdgeKind kind = EdgeKind::ControlFlow;

  friend auto operator<=>(const Reference&, const Reference&) = default;
};

struct Edge {
  BlockId src_block = 0;
  BlockId dst_block = 0;
  EdgeKind kind = EdgeKind::ControlFlow;
  Address site = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Half-open address range [a, b).
struct Interval {
  Address a = 0;
  Address b = 0;

  friend auto operator<=>(const Interval&, const Interval&) = default;
};

using IntervalGroups = std::vector<std::vector<Interval>>;

/// Groups transitively overlapping intervals. Touching intervals (a_j == b_i)
/// do not overlap. Groups come out in ascending address order.
IntervalGroups group_overlapping_intervals(std::vector<Interval> intervals);

/// Instruction-level view of the graph used for context search.
struct InstructionAdjacency {
  std::map<Address, std::vector<Address>> forward;
  std::map<Address, std::vector<Address>> backward;
};

/// Basic blocks plus typed references between them.
///
/// Invariants maintained by every mutation:
///  - two blocks never share a start address;
///  - an instruction address belongs to at most one block;
///  - a reference target that is an instruction boundary inside a block splits
///    that block, so only block heads are ever referenced.
class DisasmGraph {
 public:
  /// Registers `block`. A duplicate start is a no-op; a start that is an
  /// interior instruction of an existing block splits that block instead.
  /// The block is truncated before the first instruction already owned by
  /// another block and linked to it with a split-continuation edge.
  /// Throws std::invalid_argument if `block` is empty, not contiguous, or has
  /// a block-ending instruction before its last slot.
  BlockId insert_block(Block block);

  /// Splits `id` at the interior instruction boundary `at`. Incoming edges
  /// stay with the first part; references made by instructions in the second
  /// part move with them. Throws std::invalid_argument if `at` is not an
  /// interior instruction boundary.
  std::pair<BlockId, BlockId> split_block(BlockId id, Address at);

  void add_reference(Address site, Address target, EdgeKind kind);

  /// If `insn` is an interior instruction of some block, splits there.
  /// Returns true when a split happened.
  bool ensure_block_head(Address insn);

  /// Removes the block and every reference made from it.
  void remove_block(BlockId id);

  /// Drops individual instructions, splitting their blocks as needed.
  void remove_instructions(const std::set<Address>& addresses);

  const std::map<BlockId, Block>& blocks() const { return blocks_; }
  const Block* find_block(BlockId id) const;
  const Block* block_owning(Address insn) const;
  const Instruction* instruction(Address insn) const;
  bool has_instruction(Address insn) const { return owner_.contains(insn); }

  /// Instructions (from any block) whose bytes include `byte`.
  std::vector<const Instruction*> instructions_covering(Address byte) const;

  std::size_t instruction_count() const { return owner_.size(); }

  /// References whose target currently heads a block, resolved to edges.
  std::vector<Edge> edges() const;
  const std::set<Reference>& references() const { return refs_; }

  /// Rebuilt lazily after mutations.
  const InstructionAdjacency& adjacency() const;

  /// Monotonic counter bumped by every mutation.
  std::uint64_t version() const { return version_; }

 private:
  void index_block(const Block& block);
  void split_at_references(BlockId id);

  std::map<BlockId, Block> blocks_;
  std::map<Address, BlockId> owner_;
  std::set<Reference> refs_;
  std::uint64_t version_ = 0;

  mutable std::uint64_t adjacency_version_ = ~std::uint64_t{0};
  mutable InstructionAdjacency adjacency_;
};

struct SplitRecord {
  BlockId block = 0;
  Address at = 0;
};

struct MinimizeReport {
  std::vector<SplitRecord> splits;
};

/// Shrinks conflict regions: within each group of transitively overlapping
/// blocks, instructions are grouped the same way and host blocks are split at
/// each multi-instruction group's start and end address.
MinimizeReport minimize_overlap(DisasmGraph& graph);

/// JSON export: {"blocks":[{"start","end","instructions":[...]}],"edges":[...]}.
std::string graph_to_json(const DisasmGraph& graph);

}  // namespace disas
