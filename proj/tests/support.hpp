#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "disas/decode.hpp"

namespace disas::test {

inline std::vector<std::uint8_t> hex_bytes(const std::string& text) {
  std::vector<std::uint8_t> out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    if (word == "|") continue;
    out.push_back(static_cast<std::uint8_t>(std::stoul(word, nullptr, 16)));
  }
  return out;
}

inline constexpr Address kBase = 0x401000;

// Opaque predicate that hides `mov eax, 1` behind a bogus `call`.
inline std::vector<std::uint8_t> opaque_call_bytes() {
  return hex_bytes(
      "39 c0 74 03 90 cc e8 b8 01 00 00 00 bf 01 00 00 00 "
      "48 be 00 20 40 00 00 00 00 00 ba 0e 00 00 00 0f 05");
}

// Two junk bytes (0x89, 0xA9) hiding a short block and a lea.
inline std::vector<std::uint8_t> junk_infill_bytes() {
  return hex_bytes(
      "89 45 f8 | c7 45 fc 08 00 00 00 | eb 13 | 89 | c7 45 fc 17 00 00 00 | eb 09 | a9 | "
      "48 8d 3c 25 00 20 40 00 | b0 00 | e8 da ff ff ff");
}

inline std::set<Address> junk_infill_truth() {
  return {0x401000, 0x401003, 0x40100a, 0x40100d, 0x401014, 0x401017, 0x40101f, 0x401021};
}

}  // namespace disas::test
