#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace disas {

using Address = std::uint64_t;
using ByteView = std::span<const std::uint8_t>;

/// Longest legal x86 encoding.
inline constexpr std::size_t kMaxInstructionLength = 15;

enum class InsnKind : std::uint8_t {
  Sequential,
  ConditionalBranch,
  UnconditionalBranch,
  Call,
  Return,
  Halt,
  Invalid,
};

const char* to_string(InsnKind kind);

/// True for every kind that ends a basic block.
constexpr bool ends_block(InsnKind kind) {
  return kind != InsnKind::Sequential;
}

struct Instruction {
  Address address = 0;
  std::uint8_t length = 1;
  std::string mnemonic;
  std::string operands;
  InsnKind kind = InsnKind::Invalid;
  std::optional<Address> branch_target;
  std::vector<std::uint64_t> immediates;

  Address end() const { return address + length; }
  bool valid_encoding() const { return kind != InsnKind::Invalid; }

  /// Intel-syntax line: "mnemonic operands", or just the mnemonic.
  std::string text() const;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Decodes the instruction at base+offset. Undecodable bytes (including an
/// encoding truncated by the end of `bytes`) yield a one-byte `(bad)`.
/// Throws std::out_of_range when offset >= bytes.size().
Instruction decode_at(ByteView bytes, Address base, std::size_t offset);

/// Every instruction that ends exactly at `end`, starting in
/// [end-15, end-1] ∩ [base, end) and not at an excluded address.
/// Sorted by ascending start address. Invalid encodings are never returned.
std::vector<Instruction> reverse_decode(ByteView bytes, Address base, Address end,
                                        const std::set<Address>& excluded);

/// Breadth-first walk of the reverse-disassembly tree rooted at root_end.
/// Children of a node ending at `a` are the instructions ending at `a`; the
/// walk stops after `limit` instructions. Level by level, ascending start
/// address within a level; each start address is visited once.
std::vector<Instruction> reverse_tree_bfs(ByteView bytes, Address base, Address root_end,
                                          const std::set<Address>& excluded,
                                          std::size_t limit);

/// A code region with a lazily filled per-offset decode cache.
/// Not thread-safe; give each thread its own image.
class CodeImage {
 public:
  CodeImage(Address base, std::vector<std::uint8_t> bytes);

  Address base() const { return base_; }
  Address end() const { return base_ + bytes_.size(); }
  std::size_t size() const { return bytes_.size(); }
  ByteView bytes() const { return bytes_; }
  bool contains(Address a) const { return a >= base_ && a < end(); }
  std::uint8_t byte_at(Address a) const { return bytes_.at(a - base_); }

  const Instruction& at(Address a) const;

 private:
  Address base_;
  std::vector<std::uint8_t> bytes_;
  mutable std::vector<std::optional<Instruction>> cache_;
};

}  // namespace disas
