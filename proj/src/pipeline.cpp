#include "disas/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace disas {

void EngineConfig::validate() const {
  if (!(0.0 <= lo && lo < single_threshold && single_threshold < hi && hi <= 1.0)) {
    throw std::invalid_argument(
        fmt::format("thresholds must satisfy 0 <= lo < single_threshold < hi <= 1 (got {}, {}, {})",
                    lo, single_threshold, hi));
  }
  if (window == 0 || batch_size == 0 || bfs_limit == 0) {
    throw std::invalid_argument("window, batch size and BFS limit must be at least 1");
  }
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Pending: return "pending";
    case Verdict::Valid: return "valid";
    case Verdict::Invalid: return "invalid";
  }
  return "?";
}

const char* to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::Valid: return "valid";
    case RegionLabel::Invalid: return "invalid";
    case RegionLabel::Unidentified: return "unidentified";
  }
  return "?";
}

void VerdictStore::decide(const Instruction& insn, Verdict verdict, double probability) {
  if (verdict == Verdict::Pending) return;
  auto [it, fresh] = entries_.try_emplace(insn.address);
  if (!fresh && it->second.verdict != Verdict::Pending) {
    if (it->second.verdict == verdict) return;
    throw std::logic_error(fmt::format("verdict for {:#x} already {}; refusing {}", insn.address,
                                       to_string(it->second.verdict), to_string(verdict)));
  }
  it->second = {verdict, probability, insn.length};
  if (verdict == Verdict::Invalid) invalid_.insert(insn.address);
}

Verdict VerdictStore::verdict(Address a) const {
  auto it = entries_.find(a);
  return it == entries_.end() ? Verdict::Pending : it->second.verdict;
}

const VerdictEntry* VerdictStore::find(Address a) const {
  auto it = entries_.find(a);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t VerdictStore::count(Verdict verdict) const {
  return static_cast<std::size_t>(std::ranges::count_if(
      entries_, [&](const auto& kv) { return kv.second.verdict == verdict; }));
}

namespace {

EdgeKind continuation_kind(InsnKind kind) {
  switch (kind) {
    case InsnKind::ConditionalBranch:
    case InsnKind::Call: return EdgeKind::ControlFlow;
    case InsnKind::Sequential: return EdgeKind::SplitContinuation;
    default: return EdgeKind::FallthroughAfterBranch;
  }
}

// Highest probability first; ties go to the longer, then the lower, instruction.
bool better_candidate(const Instruction& a, double pa, const Instruction& b, double pb) {
  if (pa != pb) return pa > pb;
  if (a.length != b.length) return a.length > b.length;
  return a.address < b.address;
}

}  // namespace

struct Engine::ReverseState {
  enum class Phase { Batch, Single, Done };
  Address begin = 0;
  Address cur = 0;
  Phase phase = Phase::Batch;
  std::vector<Instruction> candidates;
  std::vector<double> probabilities;
  std::vector<Instruction> accepted;
};

struct Engine::ForwardState {
  enum class Stage { Decode, Prefilter, Single, Done };
  Address cursor = 0;
  Address end = 0;
  Stage stage = Stage::Decode;
  std::vector<Instruction> block;
  std::vector<double> probabilities;
  std::vector<Verdict> verdicts;
  std::vector<Block> accepted;
};

Engine::Engine(const CodeImage& image, DisasmGraph graph, Classifier& classifier,
               EngineConfig config)
    : image_(image), graph_(std::move(graph)), classifier_(classifier), config_(config) {
  config_.validate();
}

BatchQueue& Engine::queue(const std::string& tag) {
  auto& slot = queues_[tag];
  if (!slot) {
    slot = std::make_unique<BatchQueue>(classifier_, tag, config_.batch_size, &cache_,
                                        &queue_stats_);
  }
  return *slot;
}

void Engine::flush_all() {
  for (auto& [tag, q] : queues_) q->flush();
}

ClassifyRequest Engine::build_request(const std::set<Address>& targets,
                                      const std::vector<Instruction>& candidates,
                                      const std::set<Address>& anchors,
                                      const std::string& tag) const {
  std::set<Address> seeds = targets;
  for (Address a : anchors) {
    if (graph_.has_instruction(a)) seeds.insert(a);
  }
  std::set<Address> shown = related_instructions(graph_, seeds, config_.bfs_limit);
  shown.insert(seeds.begin(), seeds.end());
  std::vector<Block> blocks = extract_context_blocks(graph_, shown);

  std::set<Address> queried = targets;
  for (const auto& c : candidates) {
    queried.insert(c.address);
    if (graph_.has_instruction(c.address)) continue;
    blocks.push_back(Block{c.address, {c}});
  }
  std::ranges::sort(blocks, {}, &Block::start);

  std::map<Address, Annotation> annotations;
  for (const auto& block : blocks) {
    for (const auto& insn : block.instructions) {
      if (queried.contains(insn.address)) continue;
      switch (verdicts_.verdict(insn.address)) {
        case Verdict::Valid: annotations[insn.address] = Annotation::Valid; break;
        case Verdict::Invalid: annotations[insn.address] = Annotation::Invalid; break;
        case Verdict::Pending: break;
      }
    }
  }
  Snippet snippet = render_blocks(blocks, operand_references(blocks), annotations, queried);
  return make_request(std::move(snippet), tag);
}

void Engine::prefilter_pass() {
  std::vector<std::vector<Instruction>> windows;
  std::vector<Instruction> window;
  auto cut = [&] {
    if (!window.empty()) windows.push_back(std::move(window));
    window.clear();
  };
  Address prev_end = 0;
  for (const auto& [id, block] : graph_.blocks()) {
    if (block.start != prev_end) cut();
    for (const auto& insn : block.instructions) {
      if (verdicts_.verdict(insn.address) != Verdict::Pending) {
        cut();
        continue;
      }
      window.push_back(insn);
      if (window.size() == config_.window) cut();
    }
    prev_end = block.end();
  }
  cut();

  BatchQueue& q = queue("prefilter");
  for (const auto& w : windows) {
    std::set<Address> targets;
    std::map<Address, Instruction> by_address;
    for (const auto& insn : w) {
      targets.insert(insn.address);
      by_address.emplace(insn.address, insn);
    }
    ClassifyRequest request = build_request(targets, {}, {}, "prefilter");
    std::vector<Address> order = request.queried;
    ++pass_stats_.prefilter_requests;
    q.enqueue(std::move(request), [this, order, by_address](const ClassifyResult& r) {
      for (std::size_t i = 0; i < order.size(); ++i) {
        const double p = r.probabilities[i];
        const Instruction& insn = by_address.at(order[i]);
        if (p > config_.hi) verdicts_.decide(insn, Verdict::Valid, p);
        else if (p < config_.lo) verdicts_.decide(insn, Verdict::Invalid, p);
      }
    });
  }
  q.flush();

  std::vector<BlockId> doomed;
  for (const auto& [id, block] : graph_.blocks()) {
    const bool all_invalid = std::ranges::all_of(block.instructions, [&](const Instruction& i) {
      return verdicts_.verdict(i.address) == Verdict::Invalid;
    });
    if (all_invalid) doomed.push_back(id);
  }
  for (BlockId id : doomed) graph_.remove_block(id);
  pass_stats_.deleted_blocks += doomed.size();
  minimize_overlap(graph_);
}

void Engine::single_check_pass() {
  std::vector<Instruction> pending;
  for (const auto& [id, block] : graph_.blocks()) {
    for (const auto& insn : block.instructions) {
      if (verdicts_.verdict(insn.address) == Verdict::Pending) pending.push_back(insn);
    }
  }
  BatchQueue& q = queue("single");
  for (const auto& insn : pending) {
    ClassifyRequest request = build_request({insn.address}, {}, {}, "single");
    ++pass_stats_.single_requests;
    q.enqueue(std::move(request), [this, insn](const ClassifyResult& r) {
      const double p = r.probabilities.front();
      verdicts_.decide(insn, p >= config_.single_threshold ? Verdict::Valid : Verdict::Invalid, p);
    });
  }
  q.flush();
}

RegionMap Engine::rebuild_regions() const {
  constexpr std::uint8_t kValid = 1, kPending = 2, kInvalid = 4;
  const std::size_t size = image_.size();
  std::vector<std::uint8_t> cover(size, 0);
  auto mark = [&](Address start, std::size_t length, std::uint8_t bit) {
    for (std::size_t k = 0; k < length; ++k) {
      const Address a = start + k;
      if (image_.contains(a)) cover[a - image_.base()] |= bit;
    }
  };
  for (const auto& [id, block] : graph_.blocks()) {
    for (const auto& insn : block.instructions) {
      switch (verdicts_.verdict(insn.address)) {
        case Verdict::Valid: mark(insn.address, insn.length, kValid); break;
        case Verdict::Invalid: mark(insn.address, insn.length, kInvalid); break;
        case Verdict::Pending: mark(insn.address, insn.length, kPending); break;
      }
    }
  }
  for (const auto& [addr, entry] : verdicts_.entries()) {
    if (graph_.has_instruction(addr)) continue;
    mark(addr, entry.length, entry.verdict == Verdict::Valid ? kValid : kInvalid);
  }

  // Uncovered bytes are provisional; they inherit from their neighbours below.
  std::vector<std::optional<RegionLabel>> labels(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (cover[i] & kValid) labels[i] = RegionLabel::Valid;
    else if (cover[i] & kPending) labels[i] = RegionLabel::Unidentified;
    else if (cover[i] & kInvalid) labels[i] = RegionLabel::Invalid;
  }
  for (std::size_t i = 0; i < size;) {
    if (labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < size && !labels[j]) ++j;
    const bool near_unidentified = (i > 0 && labels[i - 1] == RegionLabel::Unidentified) ||
                                   (j < size && labels[j] == RegionLabel::Unidentified);
    for (std::size_t k = i; k < j; ++k) {
      labels[k] = near_unidentified ? RegionLabel::Unidentified : RegionLabel::Invalid;
    }
    i = j;
  }

  RegionMap map;
  for (std::size_t i = 0; i < size; ++i) {
    const Address a = image_.base() + i;
    if (!map.empty() && map.back().label == *labels[i]) {
      map.back().end = a + 1;
    } else {
      map.push_back({a, a + 1, *labels[i]});
    }
  }
  return map;
}

void Engine::clear_region(const RegionRange& region) {
  std::set<Address> doomed;
  for (const auto& [id, block] : graph_.blocks()) {
    for (const auto& insn : block.instructions) {
      if (insn.address >= region.begin && insn.address < region.end &&
          verdicts_.verdict(insn.address) == Verdict::Invalid) {
        doomed.insert(insn.address);
      }
    }
  }
  graph_.remove_instructions(doomed);
}

std::set<Address> Engine::region_anchors(Address begin, Address end) const {
  std::set<Address> anchors;
  if (begin > image_.base()) {
    for (const Instruction* insn : graph_.instructions_covering(begin - 1)) {
      if (insn->end() == begin && verdicts_.verdict(insn->address) == Verdict::Valid) {
        anchors.insert(insn->address);
      }
    }
  }
  if (graph_.has_instruction(end) && verdicts_.verdict(end) == Verdict::Valid) {
    anchors.insert(end);
  }
  return anchors;
}

void Engine::adopt(const std::vector<Instruction>& accepted) {
  if (accepted.empty()) return;
  std::vector<Instruction> sorted = accepted;
  std::ranges::sort(sorted, {}, &Instruction::address);

  std::vector<Block> blocks;
  for (const auto& insn : sorted) {
    if (graph_.has_instruction(insn.address)) continue;
    const bool extend = !blocks.empty() && blocks.back().end() == insn.address &&
                        !ends_block(blocks.back().instructions.back().kind);
    if (extend) {
      blocks.back().instructions.push_back(insn);
    } else {
      blocks.push_back(Block{insn.address, {insn}});
    }
  }
  for (auto& block : blocks) graph_.insert_block(block);

  for (const auto& insn : sorted) {
    if (insn.branch_target && image_.contains(*insn.branch_target)) {
      graph_.add_reference(insn.address, *insn.branch_target, EdgeKind::ControlFlow);
    }
    for (std::uint64_t imm : insn.immediates) {
      if (image_.contains(imm)) graph_.add_reference(insn.address, imm, EdgeKind::ImmediateRef);
    }
    if (graph_.has_instruction(insn.end())) {
      graph_.add_reference(insn.address, insn.end(), continuation_kind(insn.kind));
    }
    if (insn.address > image_.base()) {
      for (const Instruction* prev : graph_.instructions_covering(insn.address - 1)) {
        if (prev->end() == insn.address && verdicts_.verdict(prev->address) == Verdict::Valid) {
          graph_.add_reference(prev->address, insn.address, continuation_kind(prev->kind));
        }
      }
    }
  }
}

std::vector<Instruction> Engine::reverse_infill(const RegionRange& region,
                                                Address right_valid_start) {
  std::vector<ReverseState> states(1);
  states[0].begin = region.begin;
  states[0].cur = right_valid_start;
  run_reverse(states);
  std::ranges::sort(states[0].accepted, {}, &Instruction::address);
  return states[0].accepted;
}

std::vector<Block> Engine::forward_infill(const RegionRange& region) {
  std::vector<ForwardState> states(1);
  states[0].cursor = region.begin;
  states[0].end = region.end;
  run_forward(states);
  return states[0].accepted;
}

void Engine::run_reverse(std::vector<ReverseState>& states) {
  using Phase = ReverseState::Phase;
  for (;;) {
    bool active = false;
    for (auto& st : states) {
      st.candidates.clear();
      if (st.phase == Phase::Done) continue;
      if (st.cur <= st.begin) {
        st.phase = Phase::Done;
        continue;
      }
      const ByteView view = image_.bytes().subspan(st.begin - image_.base(), st.cur - st.begin);
      const auto& excluded = verdicts_.invalid_starts();
      st.candidates = st.phase == Phase::Batch
                          ? reverse_tree_bfs(view, st.begin, st.cur, excluded, config_.window)
                          : reverse_decode(view, st.begin, st.cur, excluded);
      if (st.candidates.empty()) {
        st.phase = st.phase == Phase::Batch ? Phase::Single : Phase::Done;
        active = active || st.phase != Phase::Done;
        continue;
      }
      active = true;
      st.probabilities.assign(st.candidates.size(), -1.0);
      const std::set<Address> anchors = region_anchors(st.begin, st.cur);

      std::map<Address, std::size_t> index;
      for (std::size_t i = 0; i < st.candidates.size(); ++i) index[st.candidates[i].address] = i;
      auto fill = [&st, index](std::vector<Address> order) {
        return [&st, index, order](const ClassifyResult& r) {
          for (std::size_t i = 0; i < order.size(); ++i) {
            st.probabilities[index.at(order[i])] = r.probabilities[i];
          }
        };
      };
      if (st.phase == Phase::Batch) {
        ClassifyRequest request = build_request({}, st.candidates, anchors, "reverse");
        auto order = request.queried;
        queue("reverse").enqueue(std::move(request), fill(std::move(order)));
      } else {
        for (const auto& c : st.candidates) {
          ClassifyRequest request = build_request({}, {c}, anchors, "reverse-single");
          auto order = request.queried;
          queue("reverse-single").enqueue(std::move(request), fill(std::move(order)));
        }
      }
    }
    if (!active) break;
    flush_all();

    for (auto& st : states) {
      if (st.phase == Phase::Done || st.candidates.empty()) continue;
      if (st.phase == Phase::Batch) {
        for (std::size_t i = 0; i < st.candidates.size(); ++i) {
          if (st.probabilities[i] < config_.lo) {
            verdicts_.decide(st.candidates[i], Verdict::Invalid, st.probabilities[i]);
          }
        }
        std::vector<Instruction> chain;
        Address node = st.cur;
        for (;;) {
          std::optional<std::size_t> best;
          for (std::size_t i = 0; i < st.candidates.size(); ++i) {
            const auto& c = st.candidates[i];
            if (c.end() != node || !(st.probabilities[i] > config_.hi)) continue;
            if (!best || better_candidate(c, st.probabilities[i], st.candidates[*best],
                                          st.probabilities[*best])) {
              best = i;
            }
          }
          if (!best) break;
          verdicts_.decide(st.candidates[*best], Verdict::Valid, st.probabilities[*best]);
          chain.push_back(st.candidates[*best]);
          node = st.candidates[*best].address;
        }
        if (chain.empty()) {
          st.phase = Phase::Single;
          continue;
        }
        adopt(chain);
        st.accepted.insert(st.accepted.end(), chain.begin(), chain.end());
        pass_stats_.reverse_accepted += chain.size();
        st.cur = node;
        continue;
      }

      std::size_t best = 0;
      for (std::size_t i = 1; i < st.candidates.size(); ++i) {
        if (better_candidate(st.candidates[i], st.probabilities[i], st.candidates[best],
                             st.probabilities[best])) {
          best = i;
        }
      }
      if (!(st.probabilities[best] > config_.single_threshold)) {
        st.phase = Phase::Done;
        continue;
      }
      verdicts_.decide(st.candidates[best], Verdict::Valid, st.probabilities[best]);
      adopt({st.candidates[best]});
      st.accepted.push_back(st.candidates[best]);
      ++pass_stats_.reverse_accepted;
      st.cur = st.candidates[best].address;
    }
  }
}

void Engine::run_forward(std::vector<ForwardState>& states) {
  using Stage = ForwardState::Stage;
  auto finish_block = [this](ForwardState& st) {
    std::optional<Address> last_valid_end;
    Block found;
    for (std::size_t i = 0; i < st.block.size(); ++i) {
      if (st.verdicts[i] != Verdict::Valid) continue;
      last_valid_end = st.block[i].end();
      if (found.instructions.empty()) found.start = st.block[i].address;
      found.instructions.push_back(st.block[i]);
    }
    if (last_valid_end) {
      st.accepted.push_back(std::move(found));
      st.cursor = *last_valid_end;
    } else {
      st.cursor = st.block.front().address + 1;
    }
    st.block.clear();
    st.stage = Stage::Decode;
  };

  for (;;) {
    bool active = false;
    for (auto& st : states) {
      if (st.stage == Stage::Done) continue;
      if (st.stage == Stage::Decode) {
        const auto& invalid = verdicts_.invalid_starts();
        while (st.cursor < st.end && invalid.contains(st.cursor)) ++st.cursor;
        if (st.cursor >= st.end) {
          st.stage = Stage::Done;
          continue;
        }
        for (Address a = st.cursor; a < st.end;) {
          if (invalid.contains(a)) break;
          const Instruction& insn = image_.at(a);
          if (!insn.valid_encoding() || insn.end() > st.end) break;
          st.block.push_back(insn);
          a = insn.end();
          if (ends_block(insn.kind)) break;
        }
        if (st.block.empty()) {
          // Undecodable here or spills into the valid region on the right.
          verdicts_.decide(image_.at(st.cursor), Verdict::Invalid, 0.0);
          ++st.cursor;
          active = true;
          continue;
        }
        st.probabilities.assign(st.block.size(), -1.0);
        st.verdicts.assign(st.block.size(), Verdict::Pending);
        st.stage = Stage::Prefilter;
      }
      active = true;

      std::map<Address, std::size_t> index;
      for (std::size_t i = 0; i < st.block.size(); ++i) index[st.block[i].address] = i;
      auto fill = [&st, index](std::vector<Address> order) {
        return [&st, index, order](const ClassifyResult& r) {
          for (std::size_t i = 0; i < order.size(); ++i) {
            st.probabilities[index.at(order[i])] = r.probabilities[i];
          }
        };
      };
      const std::set<Address> anchors = region_anchors(st.cursor, st.end);
      if (st.stage == Stage::Prefilter) {
        for (std::size_t i = 0; i < st.block.size(); i += config_.window) {
          const std::size_t n = std::min(config_.window, st.block.size() - i);
          std::vector<Instruction> window(st.block.begin() + i, st.block.begin() + i + n);
          ClassifyRequest request = build_request({}, window, anchors, "forward");
          auto order = request.queried;
          queue("forward").enqueue(std::move(request), fill(std::move(order)));
        }
      } else {
        for (std::size_t i = 0; i < st.block.size(); ++i) {
          if (st.verdicts[i] != Verdict::Pending) continue;
          ClassifyRequest request = build_request({}, {st.block[i]}, anchors, "forward-single");
          auto order = request.queried;
          queue("forward-single").enqueue(std::move(request), fill(std::move(order)));
        }
      }
    }
    if (!active) break;
    flush_all();

    for (auto& st : states) {
      if (st.stage != Stage::Prefilter && st.stage != Stage::Single) continue;
      std::vector<Instruction> valid_now;
      bool pending_left = false;
      for (std::size_t i = 0; i < st.block.size(); ++i) {
        if (st.verdicts[i] != Verdict::Pending) continue;
        const double p = st.probabilities[i];
        Verdict v = Verdict::Pending;
        if (st.stage == Stage::Prefilter) {
          if (p > config_.hi) v = Verdict::Valid;
          else if (p < config_.lo) v = Verdict::Invalid;
        } else {
          v = p >= config_.single_threshold ? Verdict::Valid : Verdict::Invalid;
        }
        if (v == Verdict::Pending) {
          pending_left = true;
          continue;
        }
        st.verdicts[i] = v;
        verdicts_.decide(st.block[i], v, p);
        if (v == Verdict::Valid) valid_now.push_back(st.block[i]);
      }
      adopt(valid_now);
      pass_stats_.forward_accepted += valid_now.size();
      if (st.stage == Stage::Prefilter && pending_left) {
        st.stage = Stage::Single;
      } else {
        finish_block(st);
      }
    }
  }
}

std::size_t Engine::fix_round() {
  const RegionMap regions = rebuild_regions();
  std::vector<RegionRange> targets;
  for (std::size_t i = 1; i + 1 < regions.size(); ++i) {
    if (regions[i].label == RegionLabel::Invalid && regions[i - 1].label == RegionLabel::Valid &&
        regions[i + 1].label == RegionLabel::Valid) {
      targets.push_back(regions[i]);
    }
  }
  if (targets.empty()) return 0;
  for (const auto& r : targets) clear_region(r);

  const std::size_t before = pass_stats_.reverse_accepted + pass_stats_.forward_accepted;
  std::vector<ReverseState> reverse(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    reverse[i].begin = targets[i].begin;
    reverse[i].cur = targets[i].end;
  }
  run_reverse(reverse);

  std::vector<ForwardState> forward(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    forward[i].cursor = targets[i].begin;
    forward[i].end = reverse[i].cur;
  }
  run_forward(forward);
  ++pass_stats_.fix_rounds;
  return pass_stats_.reverse_accepted + pass_stats_.forward_accepted - before;
}

FinalListing Engine::run() {
  minimize_overlap(graph_);
  prefilter_pass();
  single_check_pass();
  for (std::size_t round = 0; round < config_.max_fix_rounds; ++round) {
    const std::size_t accepted = fix_round();
    minimize_overlap(graph_);
    if (accepted == 0) break;
  }
  return final_listing();
}

FinalListing Engine::final_listing() const {
  FinalListing listing;
  for (const auto& [addr, entry] : verdicts_.entries()) {
    if (entry.verdict != Verdict::Valid) continue;
    const Instruction* insn = graph_.instruction(addr);
    listing.instructions.push_back(insn != nullptr ? *insn : image_.at(addr));
  }
  std::vector<bool> covered(image_.size(), false);
  std::vector<Interval> spans;
  for (const auto& insn : listing.instructions) {
    spans.push_back({insn.address, insn.end()});
    for (Address a = insn.address; a < insn.end() && image_.contains(a); ++a) {
      covered[a - image_.base()] = true;
    }
  }
  for (const auto& group : group_overlapping_intervals(std::move(spans))) {
    if (group.size() < 2) continue;
    for (const Interval& span : group) listing.overlapping.push_back(span.a);
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) listing.data_bytes.emplace_back(image_.base() + i, image_.bytes()[i]);
  }
  return listing;
}

std::string FinalListing::text() const {
  // Merge instruction groups and gap bytes by address.
  std::vector<Interval> spans;
  std::map<Address, const Instruction*> by_address;
  for (const auto& insn : instructions) {
    spans.push_back({insn.address, insn.end()});
    by_address.emplace(insn.address, &insn);
  }
  struct Item {
    Address at;
    std::string text;
  };
  std::vector<Item> items;
  for (const auto& group : group_overlapping_intervals(std::move(spans))) {
    std::string text;
    if (group.size() == 1) {
      text = by_address.at(group.front().a)->text() + "\n";
    } else {
      text = "<<<<<<<\n";
      for (std::size_t i = 0; i < group.size(); ++i) {
        if (i > 0) text += "=======\n";
        text += by_address.at(group[i].a)->text() + "\n";
      }
      text += ">>>>>>>\n";
    }
    items.push_back({group.front().a, std::move(text)});
  }
  for (const auto& [addr, value] : data_bytes) {
    items.push_back({addr, render_gap_byte(addr, value) + "\n"});
  }
  std::ranges::stable_sort(items, {}, &Item::at);
  std::string out;
  for (const auto& item : items) out += item.text;
  return out;
}

std::string FinalListing::to_json() const {
  using nlohmann::json;
  const std::set<Address> flagged(overlapping.begin(), overlapping.end());
  json insns = json::array();
  for (const auto& insn : instructions) {
    json entry{{"address", insn.address}, {"length", insn.length}, {"text", insn.text()}};
    if (flagged.contains(insn.address)) entry["overlapping"] = true;
    insns.push_back(std::move(entry));
  }
  json bytes = json::array();
  for (const auto& [addr, value] : data_bytes) bytes.push_back({{"address", addr}, {"value", value}});
  return json{{"instructions", insns}, {"data_bytes", bytes}}.dump(2);
}

FinalListing run_pipeline(const CodeRegion& region, Classifier& classifier,
                          const EngineConfig& config) {
  CodeImage image(region.base, region.bytes);
  Engine engine(image, initial_disassemble(image, region.entry_points), classifier, config);
  return engine.run();
}

}  // namespace disas
