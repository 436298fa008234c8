#include <doctest.h>

#include <filesystem>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "disas/corpus.hpp"
#include "support.hpp"

using namespace disas;

TEST_CASE("generation is deterministic and validates") {
  const Sample a = generate_sample(5);
  const Sample b = generate_sample(5);
  CHECK(a.region.bytes == b.region.bytes);
  CHECK(a.truth.instruction_starts == b.truth.instruction_starts);
  CHECK(generate_sample(6).region.bytes != a.region.bytes);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Sample s = generate_sample(seed);
    CHECK_NOTHROW(validate_sample(s));
    CHECK_FALSE(s.truth.junk_ranges.empty());
    for (const Interval& r : s.truth.junk_ranges) {
      CHECK(r.b - r.a >= 1);
      CHECK(r.b - r.a <= 15);
      CHECK(s.truth.first_after_junk.contains(r.b));
    }
  }
}

TEST_CASE("zero junk") {
  GenParams p;
  p.junk_probability = 0.0;
  const Sample s = generate_sample(2, p);
  CHECK(s.truth.junk_ranges.empty());
  CHECK(s.truth.first_after_junk.empty());
  CHECK_NOTHROW(validate_sample(s));
}

TEST_CASE("validator catches inconsistencies") {
  Sample s = generate_sample(3);
  Sample shifted = s;
  const Address mid = *std::next(shifted.truth.instruction_starts.begin(), 3);
  shifted.truth.instruction_starts.erase(mid);
  shifted.truth.instruction_starts.insert(mid + 1);
  CHECK_THROWS(validate_sample(shifted));

  Sample lost = s;
  lost.truth.first_after_junk.clear();
  CHECK_THROWS(validate_sample(lost));

  Sample clobbered = s;
  clobbered.region.bytes[clobbered.truth.junk_ranges.front().b - clobbered.region.base] = 0x06;
  CHECK_THROWS(validate_sample(clobbered));
}

TEST_CASE("bad parameters") {
  GenParams p;
  p.blocks = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.junk_max = 16;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("sample files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "disas_corpus_test";
  std::filesystem::remove_all(dir);
  const Sample s = generate_sample(8);
  write_sample(dir, "s", s);
  const Sample back = read_sample(dir / "s.bin", dir / "s.json");
  CHECK(back.region.bytes == s.region.bytes);
  CHECK(back.region.base == s.region.base);
  CHECK(back.region.entry_points == s.region.entry_points);
  CHECK(back.truth.instruction_starts == s.truth.instruction_starts);
  CHECK(back.truth.junk_ranges == s.truth.junk_ranges);
  CHECK(back.truth.first_after_junk == s.truth.first_after_junk);
  CHECK_THROWS(read_sample(dir / "missing.bin", dir / "s.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("MNTP lines for junk bytes and jumps") {
  // leave byte, then a jmp whose second byte decodes to something else.
  CodeRegion region{0x29f0, test::hex_bytes("c9 88 eb 01 90 c3"), {0x29f0}};
  GroundTruth truth;
  truth.instruction_starts = {0x29f2, 0x29f4, 0x29f5};
  truth.junk_ranges = {{0x29f0, 0x29f2}};
  truth.first_after_junk = {0x29f2};
  const std::string text = emit_mntp_text(region, truth, 1);
  CHECK(text.starts_with(".byte 0xc9 ; leave  ; invalid\n"));
  CHECK(text.find("jmp 0x29f5 ; valid\n; offset 1: ") != std::string::npos);
  CHECK(text.find("\n\n0x29f5:\nret ; valid\n") != std::string::npos);
  // nop is a single byte: no offset comment follows it.
  CHECK(text.find("nop ; valid\n\n") != std::string::npos);
}

TEST_CASE("MNTP round trip over generated samples") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Sample s = generate_sample(seed);
    const std::string text = emit_mntp_text(s.region, s.truth, seed);
    CHECK(emit_mntp_text(s.region, s.truth, seed) == text);
    const auto lines = parse_mntp_text(text);
    std::size_t bytes = 0, insns = 0, offsets = 0, multibyte = 0, junk = 0;
    std::string rebuilt;
    for (const auto& l : lines) {
      switch (l.kind) {
        case MntpLineKind::ByteLine:
          ++bytes;
          rebuilt += fmt::format(".byte 0x{:02x} ; {} ; invalid\n", l.value, l.instruction);
          break;
        case MntpLineKind::Instruction:
          ++insns;
          CHECK(l.valid);
          rebuilt += l.instruction + " ; valid\n";
          break;
        case MntpLineKind::OffsetComment:
          ++offsets;
          rebuilt += fmt::format("; offset {}: {} ; invalid\n", l.offset, l.instruction);
          break;
        case MntpLineKind::Label: rebuilt += fmt::format("0x{:x}:\n", l.address); break;
        case MntpLineKind::Blank: rebuilt += "\n"; break;
      }
    }
    CHECK(rebuilt == text);
    for (Address a : s.truth.instruction_starts) {
      if (decode_at(s.region.bytes, s.region.base, a - s.region.base).length > 1) ++multibyte;
    }
    for (const auto& r : s.truth.junk_ranges) junk += r.b - r.a;
    CHECK(insns == s.truth.instruction_starts.size());
    CHECK(offsets == multibyte);
    CHECK(bytes == junk);
  }
  CHECK_THROWS(parse_mntp_text("mov eax, 1\n"));
  CHECK_THROWS(parse_mntp_text("; offset x: nop ; invalid\n"));
}

TEST_CASE("supervised entries") {
  const Sample s = generate_sample(12);
  const SupervisedRun run = emit_supervised_entries(s.region, s.truth);
  REQUIRE_FALSE(run.entries.empty());
  std::size_t labelled = 0;
  bool saw_valid = false, saw_invalid = false;
  for (const auto& e : run.entries) {
    REQUIRE(e.words.size() == e.labels.size());
    for (int label : e.labels) {
      CHECK((label == kLabelValid || label == kLabelInvalid || label == kLabelIgnored));
      if (label != kLabelIgnored) ++labelled;
      saw_valid = saw_valid || label == kLabelValid;
      saw_invalid = saw_invalid || label == kLabelInvalid;
    }
  }
  CHECK(labelled == run.instructions_queried);
  CHECK(saw_valid);
  CHECK(saw_invalid);

  const auto j = nlohmann::json::parse(entry_to_json(run.entries.front()));
  CHECK(j.at("words").size() == j.at("labels").size());

  const SupervisedRun empty = emit_supervised_entries({0x1000, {}, {}}, {});
  CHECK(empty.entries.empty());
}

TEST_CASE("split_request tiles the snippet text") {
  Snippet snippet{"0x10:\nnop\nret ; valid\n; 0x12\n", {{6, 9, 0x10}}};
  const ClassifyRequest r = make_request(snippet, "t");
  const DatasetEntry e = split_request(r, {0x10});
  CHECK(e.words == std::vector<std::string>{"0x10:\n", "nop", "\nret ; valid\n; 0x12\n"});
  CHECK(e.labels == std::vector<int>{kLabelIgnored, kLabelValid, kLabelIgnored});
  CHECK(std::accumulate(e.words.begin(), e.words.end(), std::string()) == snippet.text);
  CHECK(split_request(r, {}).labels[1] == kLabelInvalid);
}
