#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "disas/graph.hpp"

namespace disas {

enum class Annotation : std::uint8_t { None, Valid, Invalid };

/// Byte range [start, end) of one queried instruction line, excluding any
/// trailing comment.
struct WordSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  Address address = 0;

  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

struct Snippet {
  std::string text;
  std::vector<WordSpan> word_spans;
};

/// `0x401000` style address (lowercase hex).
std::string hex_address(Address address);

/// `db 0xA9` gap line (uppercase hex pair).
std::string render_gap_byte(Address address, std::uint8_t value);

/// Branch targets and immediates of the given blocks' instructions that hit
/// the start of one of those instructions.
std::set<Address> operand_references(std::span<const Block> blocks);

/// Renders blocks as assembly text.
///
/// Contiguous runs of non-overlapping blocks share one `0xSTART:` label and
/// one `; 0xEND` comment; referenced interior addresses get their own label.
/// Transitively overlapping blocks are wrapped in `<<<<<<<` / `=======` /
/// `>>>>>>>`, one alternative per chain of adjacent blocks. Regions are
/// separated by one blank line. Throws std::invalid_argument unless `blocks`
/// is sorted by strictly ascending start address.
Snippet render_blocks(std::span<const Block> blocks, const std::set<Address>& refs,
                      const std::map<Address, Annotation>& annotations,
                      const std::set<Address>& queried);

}  // namespace disas
