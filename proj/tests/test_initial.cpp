#include <doctest.h>

#include "disas/corpus.hpp"
#include "disas/initial.hpp"
#include "support.hpp"

using namespace disas;

TEST_CASE("opaque predicate: both sides of the branch are decoded") {
  CodeImage image(test::kBase, test::opaque_call_bytes());
  const DisasmGraph g = initial_disassemble(image, {test::kBase});
  std::vector<Address> starts;
  for (const auto& [id, b] : g.blocks()) starts.push_back(id);
  CHECK(starts == std::vector<Address>{0x401000, 0x401004, 0x401007, 0x40100b, 0x401011});
  CHECK(g.find_block(0x401004)->instructions.back().text() == "call 0x4011c3");
  // Out-of-image call target is not followed.
  CHECK_FALSE(g.has_instruction(0x4011c3));
}

TEST_CASE("desynchronized decode converges and is linked") {
  CodeImage image(test::kBase, test::junk_infill_bytes());
  const DisasmGraph g = initial_disassemble(image, {test::kBase});
  CHECK(g.has_instruction(0x40100c));  // junk decoded after the jmp
  CHECK(g.has_instruction(0x40101f));  // jump target
  CHECK(g.has_instruction(0x401021));
  CHECK(g.find_block(0x40101f) != nullptr);
}

TEST_CASE("immediates that land inside the image seed decoding") {
  // mov eax, 0x401008 ; ret ; junk ; nop ; ret
  CodeImage image(test::kBase, test::hex_bytes("b8 08 10 40 00 c3 06 06 90 c3"));
  const DisasmGraph g = initial_disassemble(image, {test::kBase});
  REQUIRE(g.find_block(0x401008) != nullptr);
  bool imm = false;
  for (const auto& r : g.references()) {
    if (r.site == 0x401000 && r.target == 0x401008 && r.kind == EdgeKind::ImmediateRef) imm = true;
  }
  CHECK(imm);
}

TEST_CASE("empty image gives an empty graph") {
  CodeImage image(test::kBase, {});
  CHECK(initial_disassemble(image, {}).blocks().empty());
}

TEST_CASE("without junk the initial pass recovers every instruction") {
  GenParams params;
  params.junk_probability = 0.0;
  params.bogus_probability = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Sample s = generate_sample(seed, params);
    CHECK(s.truth.junk_ranges.empty());
    const DisasmGraph g = initial_disassemble(s.region);
    for (Address a : s.truth.instruction_starts) CHECK(g.has_instruction(a));
  }
}
