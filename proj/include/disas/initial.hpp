#pragma once

#include <cstdint>
#include <vector>

#include "disas/decode.hpp"
#include "disas/graph.hpp"

namespace disas {

struct CodeRegion {
  Address base = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<Address> entry_points;
};

/// Linear + recursive disassembly seeded at the image base and each entry
/// point. Direct branch targets are followed, the address after every
/// block-ending instruction is decoded as well, and immediate operands that
/// land on an unclaimed position inside the image are treated as code
/// references. Each address is decoded as a block head at most once.
DisasmGraph initial_disassemble(const CodeImage& image, const std::vector<Address>& entry_points);

DisasmGraph initial_disassemble(const CodeRegion& region);

}  // namespace disas
