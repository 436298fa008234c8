#include "disas/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <regex>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace disas {

void GenParams::validate() const {
  if (blocks == 0) throw std::invalid_argument("need at least one block");
  if (min_body > max_body) throw std::invalid_argument("min_body exceeds max_body");
  if (junk_min == 0 || junk_min > junk_max || junk_max > kMaxInstructionLength) {
    throw std::invalid_argument("junk lengths must satisfy 1 <= junk_min <= junk_max <= 15");
  }
  for (double p : {junk_probability, bogus_probability, immediate_ref_probability}) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("probabilities must be in [0, 1]");
  }
}

namespace {

using Bytes = std::vector<std::uint8_t>;

// General-purpose registers other than rsp and rbp.
constexpr std::array<std::uint8_t, 6> kRegs = {0, 1, 2, 3, 6, 7};

enum class Fixup : std::uint8_t { None, Rel32ToBlock, Rel32ToJunk, Imm32Block };

struct Item {
  Bytes bytes;
  Fixup fixup = Fixup::None;
  std::size_t target = 0;  // block index for Rel32ToBlock / Imm32Block
};

struct GenBlock {
  std::vector<Item> items;
  bool falls_through = true;
};

class Synth {
 public:
  explicit Synth(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::uint8_t byte() { return static_cast<std::uint8_t>(below(256)); }
  std::uint8_t reg() { return kRegs[below(kRegs.size())]; }
  std::uint8_t frame_slot() { return static_cast<std::uint8_t>(0x100 - 4 * between(1, 16)); }

  void imm32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::uint32_t small_constant() {
    return chance(0.7) ? static_cast<std::uint32_t>(below(0x100))
                       : static_cast<std::uint32_t>(below(0x10000));
  }

  // One straight-line instruction.
  Bytes body_instruction() {
    Bytes b;
    const std::uint8_t r = reg();
    const std::uint8_t s = reg();
    switch (below(17)) {
      case 0:
        b = {static_cast<std::uint8_t>(0xb8 + r)};
        imm32(b, small_constant());
        break;
      case 1: {
        static constexpr std::array<std::uint8_t, 8> ops = {0x01, 0x29, 0x31, 0x21,
                                                             0x09, 0x39, 0x85, 0x89};
        if (chance(0.4)) b.push_back(0x48);
        b.push_back(ops[below(ops.size())]);
        b.push_back(static_cast<std::uint8_t>(0xc0 | (s << 3) | r));
        break;
      }
      case 2: {
        static constexpr std::array<std::uint8_t, 6> ext = {0, 1, 4, 5, 6, 7};
        if (chance(0.4)) b.push_back(0x48);
        b.push_back(0x83);
        b.push_back(static_cast<std::uint8_t>(0xc0 | (ext[below(ext.size())] << 3) | r));
        b.push_back(static_cast<std::uint8_t>(below(0x80)));
        break;
      }
      case 3: b = {0x89, static_cast<std::uint8_t>(0x45 | (r << 3)), frame_slot()}; break;
      case 4: b = {0x8b, static_cast<std::uint8_t>(0x45 | (r << 3)), frame_slot()}; break;
      case 5:
        b = {0xc7, 0x45, frame_slot()};
        imm32(b, small_constant());
        break;
      case 6:
        b = {0x48, 0x8d, static_cast<std::uint8_t>(0x05 | (r << 3))};
        imm32(b, static_cast<std::uint32_t>(between(0x100, 0x4000)));
        break;
      case 7: b = {0x48, 0x89, static_cast<std::uint8_t>(0xc0 | (s << 3) | r)}; break;
      case 8: b = {static_cast<std::uint8_t>((chance(0.5) ? 0x50 : 0x58) + r)}; break;
      case 9: b = {0xff, static_cast<std::uint8_t>((chance(0.5) ? 0xc0 : 0xc8) + r)}; break;
      case 10: b = {0xc1, static_cast<std::uint8_t>(0xe0 + r), static_cast<std::uint8_t>(between(1, 31))}; break;
      case 11:
        b = {0x6b, static_cast<std::uint8_t>(0xc0 | (r << 3) | s),
             static_cast<std::uint8_t>(between(2, 0x7f))};
        break;
      case 12: b = {0x0f, 0xb6, static_cast<std::uint8_t>(0x45 | (r << 3)), frame_slot()}; break;
      case 13: b = chance(0.5) ? Bytes{0x90} : Bytes{0x0f, 0x1f, 0x40, 0x00}; break;
      case 14: {
        b = {0x48, static_cast<std::uint8_t>(0xb8 + r)};
        const std::uint64_t v = 0x7f0000000000ULL + below(1u << 30);
        for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        break;
      }
      case 15:
        b = {0x48, 0x81, static_cast<std::uint8_t>(0xc0 + r)};
        imm32(b, small_constant());
        break;
      default:
        b = {0x48, 0x8b, static_cast<std::uint8_t>(0x45 | (r << 3)), frame_slot()};
        break;
    }
    return b;
  }

  // Junk: uniform bytes, or strict prefixes of real encodings so that the
  // decoder swallows the following code.
  Bytes junk(std::size_t length) {
    Bytes out;
    const bool uniform = chance(0.4);
    while (out.size() < length) {
      if (uniform) {
        out.push_back(byte());
        continue;
      }
      Bytes enc = body_instruction();
      if (enc.size() < 2) {
        out.push_back(byte());
        continue;
      }
      const std::size_t keep = std::min(between(1, enc.size() - 1), length - out.size());
      out.insert(out.end(), enc.begin(), enc.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

Item rel32_item(Bytes opcode, Fixup fixup, std::size_t target) {
  Item item{std::move(opcode), fixup, target};
  item.bytes.insert(item.bytes.end(), 4, 0);
  return item;
}

void patch32(Bytes& bytes, std::size_t at, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

}  // namespace

Sample generate_sample(std::uint64_t seed, const GenParams& params) {
  params.validate();
  Synth synth(seed);
  const std::size_t n = params.blocks;
  auto other_block = [&](std::size_t self) {
    if (n == 1) return self;
    std::size_t t = synth.below(n - 1);
    return t >= self ? t + 1 : t;
  };

  std::vector<GenBlock> blocks(n);
  for (std::size_t i = 0; i < n; ++i) {
    GenBlock& block = blocks[i];
    const std::size_t body = synth.between(params.min_body, params.max_body);
    for (std::size_t k = 0; k < body; ++k) block.items.push_back({synth.body_instruction()});
    if (n > 1 && synth.chance(params.immediate_ref_probability)) {
      Item item{{static_cast<std::uint8_t>(0xb8 + synth.reg())}, Fixup::Imm32Block, other_block(i)};
      item.bytes.insert(item.bytes.end(), 4, 0);
      block.items.insert(block.items.begin() + static_cast<std::ptrdiff_t>(synth.below(body + 1)),
                         std::move(item));
    }
    if (n > 1 && synth.chance(0.1)) {
      block.items.push_back(rel32_item({0xe8}, Fixup::Rel32ToBlock, other_block(i)));
    }
    if (synth.chance(params.bogus_probability)) {
      block.items.push_back({{0x39, 0xc0}});
      block.items.push_back(rel32_item({0x0f, 0x85}, Fixup::Rel32ToJunk, 0));
    }

    const bool last = i + 1 == n;
    if (i == 0 && n > 1) {
      block.items.push_back({{0xff, 0xe0}});  // jmp rax: the dispatcher
      block.falls_through = false;
      continue;
    }
    const double r = static_cast<double>(synth.below(100)) / 100.0;
    if (r < 0.45 || (last && r < 0.7)) {
      block.items.push_back(rel32_item({0xe9}, Fixup::Rel32ToBlock, other_block(i)));
      block.falls_through = false;
    } else if (r < 0.65 || last) {
      block.items.push_back({{0xc3}});
      block.falls_through = false;
    } else if (r < 0.85) {
      const auto cc = static_cast<std::uint8_t>(0x80 + synth.below(16));
      block.items.push_back(rel32_item({0x0f, cc}, Fixup::Rel32ToBlock, other_block(i)));
    }
  }

  // Layout, then junk, then fixups.
  Sample sample;
  sample.region.base = params.base;
  sample.region.entry_points = {params.base};
  Bytes& bytes = sample.region.bytes;
  std::vector<Address> block_addr(n);
  struct Pending {
    std::size_t offset;
    Address next;
    Fixup fixup;
    std::size_t target;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < n; ++i) {
    block_addr[i] = params.base + bytes.size();
    for (const Item& item : blocks[i].items) {
      const Address at = params.base + bytes.size();
      sample.truth.instruction_starts.insert(at);
      bytes.insert(bytes.end(), item.bytes.begin(), item.bytes.end());
      if (item.fixup == Fixup::Imm32Block) {
        pending.push_back({bytes.size() - 4, 0, item.fixup, item.target});
      } else if (item.fixup != Fixup::None) {
        pending.push_back({bytes.size() - 4, params.base + bytes.size(), item.fixup, item.target});
      }
    }
    if (!blocks[i].falls_through && i + 1 < n && synth.chance(params.junk_probability)) {
      const std::size_t len = synth.between(params.junk_min, params.junk_max);
      const Address a = params.base + bytes.size();
      Bytes junk = synth.junk(len);
      bytes.insert(bytes.end(), junk.begin(), junk.end());
      sample.truth.junk_ranges.push_back({a, a + len});
      sample.truth.first_after_junk.insert(a + len);
    }
  }
  for (const Pending& p : pending) {
    Address target = 0;
    switch (p.fixup) {
      case Fixup::Rel32ToJunk:
        target = sample.truth.junk_ranges.empty()
                     ? block_addr[synth.below(n)]
                     : sample.truth.junk_ranges[synth.below(sample.truth.junk_ranges.size())].a;
        break;
      default: target = block_addr[p.target]; break;
    }
    const std::uint32_t value = p.fixup == Fixup::Imm32Block
                                    ? static_cast<std::uint32_t>(target)
                                    : static_cast<std::uint32_t>(target - p.next);
    patch32(bytes, p.offset, value);
  }
  return sample;
}

void validate_sample(const Sample& sample) {
  const auto& region = sample.region;
  const auto& truth = sample.truth;
  const Address end = region.base + region.bytes.size();
  std::map<Address, Address> junk;
  for (const Interval& r : truth.junk_ranges) {
    if (r.a >= r.b) throw std::runtime_error(fmt::format("empty junk range at {:#x}", r.a));
    junk.emplace(r.a, r.b);
  }

  std::set<Address> seen_starts;
  std::set<Address> after_junk;
  Address pos = region.base;
  while (pos < end) {
    if (truth.instruction_starts.contains(pos)) {
      const Instruction insn = decode_at(region.bytes, region.base, pos - region.base);
      if (!insn.valid_encoding()) {
        throw std::runtime_error(fmt::format("truth start {:#x} does not decode", pos));
      }
      if (insn.end() > end) {
        throw std::runtime_error(fmt::format("instruction at {:#x} runs past the region", pos));
      }
      seen_starts.insert(pos);
      pos = insn.end();
    } else if (auto it = junk.find(pos); it != junk.end()) {
      pos = it->second;
      if (pos < end) after_junk.insert(pos);
    } else {
      throw std::runtime_error(fmt::format("byte {:#x} is neither code nor junk", pos));
    }
  }
  if (pos != end) throw std::runtime_error("region does not end on an instruction boundary");
  if (seen_starts != truth.instruction_starts) {
    throw std::runtime_error("some truth starts fall inside other instructions or outside the region");
  }
  if (after_junk != truth.first_after_junk) {
    throw std::runtime_error("first_after_junk does not match the junk range ends");
  }
  for (Address a : after_junk) {
    if (!truth.instruction_starts.contains(a)) {
      throw std::runtime_error(fmt::format("junk is followed by a non-instruction at {:#x}", a));
    }
  }
}

void write_sample(const std::filesystem::path& dir, const std::string& name, const Sample& sample) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream bin(dir / (name + ".bin"), std::ios::binary);
    bin.write(reinterpret_cast<const char*>(sample.region.bytes.data()),
              static_cast<std::streamsize>(sample.region.bytes.size()));
    if (!bin) throw std::runtime_error(fmt::format("cannot write {}.bin", name));
  }
  nlohmann::json junk = nlohmann::json::array();
  for (const Interval& r : sample.truth.junk_ranges) junk.push_back({r.a, r.b});
  const nlohmann::json meta{{"base", sample.region.base},
                            {"entry_points", sample.region.entry_points},
                            {"instruction_starts", sample.truth.instruction_starts},
                            {"junk_ranges", junk},
                            {"first_after_junk", sample.truth.first_after_junk}};
  std::ofstream out(dir / (name + ".json"));
  out << meta.dump(1) << '\n';
  if (!out) throw std::runtime_error(fmt::format("cannot write {}.json", name));
}

Sample read_sample(const std::filesystem::path& bin, const std::filesystem::path& meta) {
  Sample sample;
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", bin.string()));
  sample.region.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

  std::ifstream min(meta);
  if (!min) throw std::runtime_error(fmt::format("cannot read {}", meta.string()));
  try {
    const nlohmann::json j = nlohmann::json::parse(min);
    sample.region.base = j.at("base").get<Address>();
    sample.region.entry_points = j.value("entry_points", std::vector<Address>{});
    if (j.contains("instruction_starts")) {
      sample.truth.instruction_starts = j.at("instruction_starts").get<std::set<Address>>();
    }
    if (j.contains("junk_ranges")) {
      for (const auto& r : j.at("junk_ranges")) {
        sample.truth.junk_ranges.push_back({r.at(0).get<Address>(), r.at(1).get<Address>()});
      }
    }
    if (j.contains("first_after_junk")) {
      sample.truth.first_after_junk = j.at("first_after_junk").get<std::set<Address>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("{}: {}", meta.string(), e.what()));
  }
  return sample;
}

std::string emit_mntp_text(const CodeRegion& region, const GroundTruth& truth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Address end = region.base + region.bytes.size();
  auto decode = [&](Address a) { return decode_at(region.bytes, region.base, a - region.base); };

  std::set<Address> labels;
  for (Address a : truth.instruction_starts) {
    const Instruction insn = decode(a);
    if (insn.branch_target && truth.instruction_starts.contains(*insn.branch_target)) {
      labels.insert(*insn.branch_target);
    }
    for (std::uint64_t imm : insn.immediates) {
      if (truth.instruction_starts.contains(imm)) labels.insert(imm);
    }
  }

  std::string out;
  for (Address pos = region.base; pos < end;) {
    if (labels.contains(pos)) {
      if (!out.empty()) out += '\n';
      out += fmt::format("{}:\n", hex_address(pos));
    }
    if (!truth.instruction_starts.contains(pos)) {
      const Instruction insn = decode(pos);
      out += fmt::format(".byte 0x{:02x} ; {} {} ; invalid\n", region.bytes[pos - region.base],
                         insn.mnemonic, insn.operands);
      ++pos;
      continue;
    }
    const Instruction insn = decode(pos);
    out += fmt::format("{} ; valid\n", insn.text());
    if (insn.length > 1) {
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, insn.length - 1u)(rng);
      out += fmt::format("; offset {}: {} ; invalid\n", k, decode(pos + k).text());
    }
    pos = insn.end();
  }
  return out;
}

std::vector<MntpLine> parse_mntp_text(const std::string& text) {
  static const std::regex label(R"(^0x([0-9a-f]+):$)");
  static const std::regex byte_line(R"(^\.byte 0x([0-9a-f]{2}) ; (.*) ; invalid$)");
  static const std::regex offset(R"(^; offset ([0-9]+): (.*) ; invalid$)");
  static const std::regex insn(R"(^([^;.].*) ; (valid|invalid)$)");

  std::vector<MntpLine> lines;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string::npos) stop = text.size();
    MntpLine line;
    line.text = text.substr(start, stop - start);
    start = stop + 1;
    ++lineno;
    std::smatch m;
    if (line.text.empty()) {
      line.kind = MntpLineKind::Blank;
    } else if (std::regex_match(line.text, m, label)) {
      line.kind = MntpLineKind::Label;
      line.address = std::stoull(m[1].str(), nullptr, 16);
    } else if (std::regex_match(line.text, m, byte_line)) {
      line.kind = MntpLineKind::ByteLine;
      line.value = static_cast<std::uint8_t>(std::stoul(m[1].str(), nullptr, 16));
      line.instruction = m[2].str();
    } else if (std::regex_match(line.text, m, offset)) {
      line.kind = MntpLineKind::OffsetComment;
      line.offset = std::stoull(m[1].str());
      line.instruction = m[2].str();
    } else if (std::regex_match(line.text, m, insn)) {
      line.kind = MntpLineKind::Instruction;
      line.instruction = m[1].str();
      line.valid = m[2].str() == "valid";
    } else {
      throw std::runtime_error(fmt::format("line {}: unrecognized: {}", lineno, line.text));
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

DatasetEntry split_request(const ClassifyRequest& request, const std::set<Address>& truth) {
  DatasetEntry entry;
  const std::string& text = request.snippet.text;
  std::size_t cursor = 0;
  for (const WordSpan& span : request.snippet.word_spans) {
    if (span.start > cursor) {
      entry.words.push_back(text.substr(cursor, span.start - cursor));
      entry.labels.push_back(kLabelIgnored);
    }
    entry.words.push_back(text.substr(span.start, span.end - span.start));
    entry.labels.push_back(truth.contains(span.address) ? kLabelValid : kLabelInvalid);
    cursor = span.end;
  }
  if (cursor < text.size()) {
    entry.words.push_back(text.substr(cursor));
    entry.labels.push_back(kLabelIgnored);
  }
  return entry;
}

RecordingClassifier::RecordingClassifier(std::set<Address> truth)
    : inner_(truth), truth_(std::move(truth)) {}

std::vector<ClassifyResult> RecordingClassifier::classify(std::span<const ClassifyRequest> batch) {
  auto results = inner_.classify(batch);
  for (const auto& request : batch) entries_.push_back(split_request(request, truth_));
  return results;
}

SupervisedRun emit_supervised_entries(const CodeRegion& region, const GroundTruth& truth,
                                      const EngineConfig& config) {
  CodeImage image(region.base, region.bytes);
  RecordingClassifier recorder(truth.instruction_starts);
  Engine engine(image, initial_disassemble(image, region.entry_points), recorder, config);
  engine.run();
  return {recorder.entries(), engine.queue_stats().instructions_queried};
}

std::string entry_to_json(const DatasetEntry& entry) {
  return nlohmann::json{{"words", entry.words}, {"labels", entry.labels}}.dump();
}

}  // namespace disas
