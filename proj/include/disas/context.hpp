#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "disas/graph.hpp"

namespace disas {

inline constexpr std::size_t kDefaultContextLimit = 32;

/// Breadth-first search over the instruction-level graph from `targets`,
/// following edges in both directions. Returns at most `limit` instructions,
/// never including the targets. Within a BFS level, addresses are taken in
/// ascending order. Throws std::invalid_argument for a target not in the graph.
std::set<Address> related_instructions(const DisasmGraph& graph, const std::set<Address>& targets,
                                       std::size_t limit = kDefaultContextLimit);

/// Maximal runs of the given instructions inside each graph block, as
/// standalone blocks sorted by start. The graph is not modified.
std::vector<Block> extract_context_blocks(const DisasmGraph& graph,
                                          const std::set<Address>& instructions);

}  // namespace disas
