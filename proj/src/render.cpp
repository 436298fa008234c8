#include "disas/render.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace disas {

std::string hex_address(Address address) { return fmt::format("{:#x}", address); }

std::string render_gap_byte(Address /*address*/, std::uint8_t value) {
  return fmt::format("db 0x{:02X}", value);
}

std::set<Address> operand_references(std::span<const Block> blocks) {
  std::set<Address> starts;
  for (const auto& block : blocks) {
    for (const auto& insn : block.instructions) starts.insert(insn.address);
  }
  std::set<Address> refs;
  for (const auto& block : blocks) {
    for (const auto& insn : block.instructions) {
      if (insn.branch_target && starts.contains(*insn.branch_target)) {
        refs.insert(*insn.branch_target);
      }
      for (std::uint64_t imm : insn.immediates) {
        if (starts.contains(imm)) refs.insert(imm);
      }
    }
  }
  return refs;
}

namespace {

class SnippetWriter {
 public:
  SnippetWriter(const std::set<Address>& refs, const std::map<Address, Annotation>& annotations,
                const std::set<Address>& queried)
      : refs_(refs), annotations_(annotations), queried_(queried) {}

  void line(std::string_view text) {
    out_.text.append(text);
    out_.text.push_back('\n');
  }

  void label(Address a) { line(hex_address(a) + ":"); }

  // A run of adjacent blocks: label, instructions, end comment.
  void run(std::span<const Block* const> blocks) {
    const Address start = blocks.front()->start;
    label(start);
    for (const Block* block : blocks) {
      for (const auto& insn : block->instructions) {
        if (insn.address != start && refs_.contains(insn.address)) label(insn.address);
        instruction(insn);
      }
    }
    line("; " + hex_address(blocks.back()->end()));
  }

  void instruction(const Instruction& insn) {
    const std::size_t begin = out_.text.size();
    out_.text.append(insn.text());
    if (queried_.contains(insn.address)) {
      out_.word_spans.push_back({begin, out_.text.size(), insn.address});
    }
    auto it = annotations_.find(insn.address);
    if (it != annotations_.end() && it->second != Annotation::None) {
      out_.text.append(it->second == Annotation::Valid ? " ; valid" : " ; invalid");
    }
    out_.text.push_back('\n');
  }

  Snippet take() { return std::move(out_); }

 private:
  const std::set<Address>& refs_;
  const std::map<Address, Annotation>& annotations_;
  const std::set<Address>& queried_;
  Snippet out_;
};

}  // namespace

Snippet render_blocks(std::span<const Block> blocks, const std::set<Address>& refs,
                      const std::map<Address, Annotation>& annotations,
                      const std::set<Address>& queried) {
  std::map<Address, const Block*> by_start;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0 && blocks[i].start <= blocks[i - 1].start) {
      throw std::invalid_argument("render_blocks: blocks must be sorted by ascending start");
    }
    by_start.emplace(blocks[i].start, &blocks[i]);
  }

  std::vector<Interval> spans;
  for (const auto& block : blocks) spans.push_back({block.start, block.end()});

  // Sections: either a run of adjacent singleton blocks or a conflict group.
  struct Section {
    bool conflict = false;
    std::vector<std::vector<const Block*>> chains;
  };
  std::vector<Section> sections;
  for (const auto& group : group_overlapping_intervals(std::move(spans))) {
    if (group.size() == 1) {
      const Block* block = by_start.at(group.front().a);
      if (!sections.empty() && !sections.back().conflict &&
          sections.back().chains.front().back()->end() == block->start) {
        sections.back().chains.front().push_back(block);
      } else {
        sections.push_back({false, {{block}}});
      }
      continue;
    }
    Section section{true, {}};
    for (const Interval& span : group) {
      const Block* block = by_start.at(span.a);
      auto chain = std::ranges::find_if(section.chains, [&](const auto& c) {
        return c.back()->end() == block->start;
      });
      if (chain != section.chains.end()) {
        chain->push_back(block);
      } else {
        section.chains.push_back({block});
      }
    }
    sections.push_back(std::move(section));
  }

  SnippetWriter writer(refs, annotations, queried);
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) writer.line("");
    const Section& section = sections[i];
    if (!section.conflict) {
      writer.run(section.chains.front());
      continue;
    }
    writer.line("<<<<<<<");
    for (std::size_t c = 0; c < section.chains.size(); ++c) {
      if (c > 0) writer.line("=======");
      writer.run(section.chains[c]);
    }
    writer.line(">>>>>>>");
  }
  return writer.take();
}

}  // namespace disas
