#include "disas/context.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace disas {

std::set<Address> related_instructions(const DisasmGraph& graph, const std::set<Address>& targets,
                                       std::size_t limit) {
  for (Address t : targets) {
    if (!graph.has_instruction(t)) {
      throw std::invalid_argument(fmt::format("related_instructions: no instruction at {:#x}", t));
    }
  }
  const InstructionAdjacency& adj = graph.adjacency();
  std::set<Address> visited = targets;
  std::set<Address> related;
  std::vector<Address> frontier(targets.begin(), targets.end());

  auto neighbours = [](const std::map<Address, std::vector<Address>>& side, Address a) {
    auto it = side.find(a);
    return it == side.end() ? std::span<const Address>{} : std::span<const Address>(it->second);
  };

  while (!frontier.empty() && related.size() < limit) {
    std::set<Address> level;
    for (Address a : frontier) {
      for (Address n : neighbours(adj.forward, a)) {
        if (!visited.contains(n)) level.insert(n);
      }
      for (Address n : neighbours(adj.backward, a)) {
        if (!visited.contains(n)) level.insert(n);
      }
    }
    frontier.clear();
    for (Address n : level) {
      if (related.size() == limit) break;
      visited.insert(n);
      related.insert(n);
      frontier.push_back(n);
    }
  }
  return related;
}

std::vector<Block> extract_context_blocks(const DisasmGraph& graph,
                                          const std::set<Address>& instructions) {
  std::set<BlockId> hosts;
  for (Address a : instructions) {
    if (const Block* b = graph.block_owning(a)) hosts.insert(b->start);
  }
  std::vector<Block> out;
  for (BlockId id : hosts) {
    const Block& block = *graph.find_block(id);
    Block piece;
    for (const auto& insn : block.instructions) {
      if (instructions.contains(insn.address)) {
        if (piece.instructions.empty()) piece.start = insn.address;
        piece.instructions.push_back(insn);
      } else if (!piece.instructions.empty()) {
        out.push_back(std::move(piece));
        piece = {};
      }
    }
    if (!piece.instructions.empty()) out.push_back(std::move(piece));
  }
  std::ranges::sort(out, {}, &Block::start);
  return out;
}

}  // namespace disas
