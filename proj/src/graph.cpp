#include "disas/graph.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace disas {

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::ControlFlow: return "control-flow";
    case EdgeKind::ImmediateRef: return "immediate-ref";
    case EdgeKind::FallthroughAfterBranch: return "fallthrough-after-branch";
    case EdgeKind::SplitContinuation: return "split-continuation";
  }
  return "?";
}

IntervalGroups group_overlapping_intervals(std::vector<Interval> intervals) {
  IntervalGroups groups;
  if (intervals.empty()) return groups;
  std::ranges::sort(intervals);

  Address reach = intervals.front().b;
  std::vector<Interval> current{intervals.front()};
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    const Interval& next = intervals[i];
    if (next.a < reach) {
      current.push_back(next);
      reach = std::max(reach, next.b);
    } else {
      groups.push_back(std::move(current));
      reach = next.b;
      current = {next};
    }
  }
  groups.push_back(std::move(current));
  return groups;
}

namespace {

void check_block_shape(const Block& block) {
  if (block.instructions.empty()) throw std::invalid_argument("block has no instructions");
  if (block.instructions.front().address != block.start) {
    throw std::invalid_argument("block start does not match its first instruction");
  }
  for (std::size_t i = 0; i + 1 < block.instructions.size(); ++i) {
    const Instruction& insn = block.instructions[i];
    if (insn.end() != block.instructions[i + 1].address) {
      throw std::invalid_argument(fmt::format("block {:#x}: instructions not contiguous at {:#x}",
                                              block.start, insn.address));
    }
    if (ends_block(insn.kind)) {
      throw std::invalid_argument(fmt::format("block {:#x}: {} instruction at {:#x} is not last",
                                              block.start, to_string(insn.kind), insn.address));
    }
  }
}

}  // namespace

void DisasmGraph::index_block(const Block& block) {
  for (const auto& insn : block.instructions) owner_[insn.address] = block.start;
}

BlockId DisasmGraph::insert_block(Block block) {
  check_block_shape(block);
  if (blocks_.contains(block.start)) return block.start;
  if (owner_.contains(block.start)) {
    ensure_block_head(block.start);
    return block.start;
  }

  auto& insns = block.instructions;
  for (std::size_t i = 1; i < insns.size(); ++i) {
    const Address addr = insns[i].address;
    if (!owner_.contains(addr)) continue;
    ensure_block_head(addr);
    const Address site = insns[i - 1].address;
    insns.resize(i);
    refs_.insert({site, addr, EdgeKind::SplitContinuation});
    break;
  }

  const BlockId id = block.start;
  index_block(block);
  blocks_.emplace(id, std::move(block));
  ++version_;
  split_at_references(id);
  return id;
}

void DisasmGraph::split_at_references(BlockId id) {
  const Block& block = blocks_.at(id);
  const Address start = block.start;
  const Address end = block.end();
  std::vector<Address> cuts;
  for (auto it = refs_.begin(); it != refs_.end(); ++it) {
    if (it->target > start && it->target < end) cuts.push_back(it->target);
  }
  std::ranges::sort(cuts);
  for (Address cut : cuts) ensure_block_head(cut);
}

std::pair<BlockId, BlockId> DisasmGraph::split_block(BlockId id, Address at) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw std::invalid_argument(fmt::format("no block at {:#x}", id));
  Block& head = it->second;
  auto pos = std::ranges::find(head.instructions, at, &Instruction::address);
  if (at == head.start || pos == head.instructions.end()) {
    throw std::invalid_argument(
        fmt::format("{:#x} is not an interior instruction boundary of block {:#x}", at, id));
  }
  Block tail;
  tail.start = at;
  tail.instructions.assign(std::make_move_iterator(pos),
                           std::make_move_iterator(head.instructions.end()));
  head.instructions.erase(pos, head.instructions.end());
  const Address site = head.instructions.back().address;

  index_block(tail);
  blocks_.emplace(at, std::move(tail));
  refs_.insert({site, at, EdgeKind::SplitContinuation});
  ++version_;
  return {id, at};
}

bool DisasmGraph::ensure_block_head(Address insn) {
  auto it = owner_.find(insn);
  if (it == owner_.end() || it->second == insn) return false;
  split_block(it->second, insn);
  return true;
}

void DisasmGraph::add_reference(Address site, Address target, EdgeKind kind) {
  if (refs_.insert({site, target, kind}).second) ++version_;
  ensure_block_head(target);
}

void DisasmGraph::remove_block(BlockId id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return;
  std::set<Address> sites;
  for (const auto& insn : it->second.instructions) {
    owner_.erase(insn.address);
    sites.insert(insn.address);
  }
  std::erase_if(refs_, [&](const Reference& r) { return sites.contains(r.site); });
  blocks_.erase(it);
  ++version_;
}

void DisasmGraph::remove_instructions(const std::set<Address>& addresses) {
  std::set<BlockId> touched;
  for (Address a : addresses) {
    if (auto it = owner_.find(a); it != owner_.end()) touched.insert(it->second);
  }
  for (BlockId id : touched) {
    // Cut every boundary between kept and dropped runs, then drop whole pieces.
    std::vector<Address> cuts;
    const auto& insns = blocks_.at(id).instructions;
    for (std::size_t i = 1; i < insns.size(); ++i) {
      if (addresses.contains(insns[i].address) != addresses.contains(insns[i - 1].address)) {
        cuts.push_back(insns[i].address);
      }
    }
    for (Address cut : cuts) ensure_block_head(cut);
    std::vector<BlockId> pieces{id};
    pieces.insert(pieces.end(), cuts.begin(), cuts.end());
    for (BlockId piece : pieces) {
      if (addresses.contains(piece)) remove_block(piece);
    }
  }
}

const Block* DisasmGraph::find_block(BlockId id) const {
  auto it = blocks_.find(id);
  return it == blocks_.end() ? nullptr : &it->second;
}

const Block* DisasmGraph::block_owning(Address insn) const {
  auto it = owner_.find(insn);
  return it == owner_.end() ? nullptr : &blocks_.at(it->second);
}

const Instruction* DisasmGraph::instruction(Address insn) const {
  const Block* block = block_owning(insn);
  if (block == nullptr) return nullptr;
  auto pos = std::ranges::find(block->instructions, insn, &Instruction::address);
  return &*pos;
}

std::vector<const Instruction*> DisasmGraph::instructions_covering(Address byte) const {
  std::vector<const Instruction*> out;
  const Address lowest = byte >= kMaxInstructionLength - 1 ? byte - (kMaxInstructionLength - 1) : 0;
  for (auto it = owner_.lower_bound(lowest); it != owner_.end() && it->first <= byte; ++it) {
    const Instruction* insn = instruction(it->first);
    if (insn->end() > byte) out.push_back(insn);
  }
  return out;
}

std::vector<Edge> DisasmGraph::edges() const {
  std::vector<Edge> out;
  for (const auto& ref : refs_) {
    if (!blocks_.contains(ref.target)) continue;
    auto src = owner_.find(ref.site);
    if (src == owner_.end()) continue;
    out.push_back({src->second, ref.target, ref.kind, ref.site});
  }
  std::ranges::sort(out);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const InstructionAdjacency& DisasmGraph::adjacency() const {
  if (adjacency_version_ == version_) return adjacency_;
  adjacency_ = {};
  auto link = [&](Address from, Address to) {
    adjacency_.forward[from].push_back(to);
    adjacency_.backward[to].push_back(from);
  };
  for (const auto& [id, block] : blocks_) {
    for (std::size_t i = 0; i + 1 < block.instructions.size(); ++i) {
      link(block.instructions[i].address, block.instructions[i + 1].address);
    }
  }
  for (const auto& edge : edges()) link(edge.site, edge.dst_block);
  for (auto* side : {&adjacency_.forward, &adjacency_.backward}) {
    for (auto& [addr, next] : *side) {
      std::ranges::sort(next);
      next.erase(std::unique(next.begin(), next.end()), next.end());
    }
  }
  adjacency_version_ = version_;
  return adjacency_;
}

MinimizeReport minimize_overlap(DisasmGraph& graph) {
  MinimizeReport report;
  std::vector<Interval> block_spans;
  for (const auto& [id, block] : graph.blocks()) block_spans.push_back({block.start, block.end()});

  std::vector<Address> cut_points;
  for (const auto& group : group_overlapping_intervals(std::move(block_spans))) {
    if (group.size() < 2) continue;
    std::vector<Interval> insn_spans;
    for (const Interval& span : group) {
      for (const auto& insn : graph.find_block(span.a)->instructions) {
        insn_spans.push_back({insn.address, insn.end()});
      }
    }
    for (const auto& insn_group : group_overlapping_intervals(std::move(insn_spans))) {
      if (insn_group.size() < 2) continue;
      Address lo = insn_group.front().a;
      Address hi = 0;
      for (const Interval& span : insn_group) hi = std::max(hi, span.b);
      cut_points.push_back(lo);
      cut_points.push_back(hi);
    }
  }
  for (Address at : cut_points) {
    const Block* host = graph.block_owning(at);
    if (host == nullptr || host->start == at) continue;
    const BlockId id = host->start;
    graph.ensure_block_head(at);
    report.splits.push_back({id, at});
  }
  return report;
}

std::string graph_to_json(const DisasmGraph& graph) {
  using nlohmann::json;
  json blocks = json::array();
  for (const auto& [id, block] : graph.blocks()) {
    json insns = json::array();
    for (const auto& insn : block.instructions) {
      insns.push_back({{"address", insn.address},
                       {"length", insn.length},
                       {"text", insn.text()},
                       {"kind", to_string(insn.kind)}});
    }
    blocks.push_back({{"start", block.start}, {"end", block.end()}, {"instructions", insns}});
  }
  json edges = json::array();
  for (const auto& edge : graph.edges()) {
    edges.push_back({{"src", edge.src_block},
                     {"dst", edge.dst_block},
                     {"site", edge.site},
                     {"kind", to_string(edge.kind)}});
  }
  return json{{"blocks", blocks}, {"edges", edges}}.dump(2);
}

}  // namespace disas
