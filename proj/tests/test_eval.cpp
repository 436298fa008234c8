#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "disas/eval.hpp"
#include "support.hpp"

using namespace disas;

namespace {

// Region of nops at 0x1000; truth instructions are 1 byte each except where
// the test says otherwise.
struct Fixture {
  CodeRegion region{0x1000, test::hex_bytes("b8 01 00 00 00 90 90 90 b8 02 00 00 00 90"), {0x1000}};
  GroundTruth truth;
  Fixture() {
    truth.instruction_starts = {0x1000, 0x1008, 0x100d};
    truth.junk_ranges = {{0x1005, 0x1008}};
    truth.first_after_junk = {0x1008};
  }
};

// O(n*m) reference.
ConfusionCounts brute(const std::vector<PredictedInstruction>& predicted, const CodeRegion& region,
                      const std::set<Address>& all_truth, const std::set<Address>& scoped) {
  ConfusionCounts c;
  std::set<Address> hit;
  for (const auto& p : predicted) {
    if (all_truth.contains(p.address)) {
      if (scoped.contains(p.address)) hit.insert(p.address);
      continue;
    }
    for (Address t : scoped) {
      const Address end = t + decode_at(region.bytes, region.base, t - region.base).length;
      if (p.address < end && t < p.address + p.length) {
        ++c.fp;
        break;
      }
    }
  }
  c.tp = hit.size();
  c.fn = scoped.size() - hit.size();
  return c;
}

}  // namespace

TEST_CASE("F1 arithmetic") {
  CHECK(f1_score(0.57, 0.47) == doctest::Approx(0.52).epsilon(0.01));
  CHECK(std::abs(f1_score(0.57, 0.47) - 0.52) <= 0.005);
  CHECK(f1_score(0, 0) == 0.0);
  const auto r = report_from_counts({6, 2, 4});
  CHECK(r.precision == doctest::Approx(0.75));
  CHECK(r.recall == doctest::Approx(0.6));
  CHECK(r.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
  const auto none = report_from_counts({0, 0, 0});
  CHECK(none.precision == 0.0);
  CHECK(none.precision_undefined);
  CHECK(none.recall_undefined);
}

TEST_CASE("perfect prediction scores 1") {
  Fixture f;
  const auto pred = predictions_from({0x1000, 0x1008, 0x100d}, f.region);
  const auto t = score_table(pred, f.truth, f.region);
  CHECK(t.all.precision == 1.0);
  CHECK(t.all.recall == 1.0);
  CHECK(t.all.f1 == 1.0);
  CHECK(t.junk.f1 == 1.0);
  CHECK(t.junk.counts.tp + t.junk.counts.fn == f.truth.first_after_junk.size());
}

TEST_CASE("non-overlapping extras do not count; overlapping ones do") {
  Fixture f;
  // 0x1006 is junk and touches no true instruction.
  auto pred = predictions_from({0x1000, 0x1006, 0x1008, 0x100d}, f.region);
  CHECK(score(pred, f.truth, f.region, Scope::All).counts.fp == 0);
  // A 3-byte span from 0x1007 runs over the mov at 0x1008.
  pred = {{0x1000, 5}, {0x1007, 3}, {0x100d, 1}};
  const auto all = score(pred, f.truth, f.region, Scope::All);
  CHECK(all.counts.tp == 2);
  CHECK(all.counts.fp == 1);
  CHECK(all.counts.fn == 1);
  const auto junk = score(pred, f.truth, f.region, Scope::Junk);
  CHECK(junk.counts.tp == 0);
  CHECK(junk.counts.fp == 1);
  CHECK(junk.counts.fn == 1);
  // Inside the first mov: overlaps a truth span, but not a junk-scope one.
  pred = {{0x1001, 2}};
  CHECK(score(pred, f.truth, f.region, Scope::All).counts.fp == 1);
  CHECK(score(pred, f.truth, f.region, Scope::Junk).counts.fp == 0);
}

TEST_CASE("empty prediction") {
  Fixture f;
  const auto r = score({}, f.truth, f.region, Scope::All);
  CHECK(r.recall == 0.0);
  CHECK(r.precision_undefined);
}

TEST_CASE("scoring agrees with the brute-force reference and ignores order") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Sample s = generate_sample(1000 + trial % 10);
    std::vector<PredictedInstruction> pred;
    const Address size = s.region.bytes.size();
    for (int k = 0; k < 60; ++k) {
      const Address a = s.region.base + rng() % size;
      pred.push_back({a, static_cast<std::uint8_t>(1 + rng() % 15)});
    }
    for (Address a : s.truth.instruction_starts) {
      if (rng() % 3 == 0) pred.push_back({a, 1});
    }
    for (Scope scope : {Scope::All, Scope::Junk}) {
      const auto& scoped = scope == Scope::All ? s.truth.instruction_starts : s.truth.first_after_junk;
      const auto got = score(pred, s.truth, s.region, scope).counts;
      const auto want = brute(pred, s.region, s.truth.instruction_starts, scoped);
      CHECK(got.tp == want.tp);
      CHECK(got.fp == want.fp);
      CHECK(got.fn == want.fn);
      auto shuffled = pred;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(score(shuffled, s.truth, s.region, scope).counts.fp == got.fp);
    }
  }
}

TEST_CASE("table formats") {
  ScoreTable t{report_from_counts({57, 43, 64}), report_from_counts({1, 0, 1})};
  const std::string csv = format_table_csv(t);
  CHECK(csv.starts_with("Scope,Precision,Recall,F1\nAll,0.5700,"));
  CHECK(csv.find("\nJunk,1.0000,0.5000,0.6667\n") != std::string::npos);
  const std::string text = format_table_text(t);
  CHECK(text.find("Precision") != std::string::npos);
  CHECK(text.find("Junk") != std::string::npos);
}
