#include "disas/initial.hpp"

#include <deque>
#include <set>

namespace disas {

namespace {

EdgeKind continuation_kind(InsnKind kind) {
  switch (kind) {
    case InsnKind::ConditionalBranch:
    case InsnKind::Call: return EdgeKind::ControlFlow;
    case InsnKind::Sequential: return EdgeKind::SplitContinuation;
    default: return EdgeKind::FallthroughAfterBranch;
  }
}

class Worklist {
 public:
  explicit Worklist(const CodeImage& image) : image_(image) {}

  void push(Address a) {
    if (image_.contains(a) && queued_.insert(a).second) pending_.push_back(a);
  }
  bool empty() const { return pending_.empty(); }
  Address pop() {
    Address a = pending_.front();
    pending_.pop_front();
    return a;
  }

 private:
  const CodeImage& image_;
  std::set<Address> queued_;
  std::deque<Address> pending_;
};

// Mid-instruction positions of blocks already in the graph are not trusted
// as immediate code pointers.
bool lands_mid_instruction(const DisasmGraph& graph, Address target) {
  for (const Instruction* insn : graph.instructions_covering(target)) {
    if (insn->address != target) return true;
  }
  return false;
}

}  // namespace

DisasmGraph initial_disassemble(const CodeImage& image, const std::vector<Address>& entry_points) {
  DisasmGraph graph;
  Worklist work(image);
  work.push(image.base());
  for (Address entry : entry_points) work.push(entry);

  while (!work.empty()) {
    const Address head = work.pop();
    if (graph.has_instruction(head)) {
      graph.ensure_block_head(head);
      continue;
    }

    Block block;
    block.start = head;
    Address cursor = head;
    bool converged = false;
    while (image.contains(cursor)) {
      if (!block.instructions.empty() && graph.has_instruction(cursor)) {
        converged = true;
        break;
      }
      const Instruction& insn = image.at(cursor);
      block.instructions.push_back(insn);
      cursor = insn.end();
      if (ends_block(insn.kind)) break;
    }
    graph.insert_block(block);

    for (const Instruction& insn : block.instructions) {
      if (insn.branch_target && image.contains(*insn.branch_target)) {
        graph.add_reference(insn.address, *insn.branch_target, EdgeKind::ControlFlow);
        work.push(*insn.branch_target);
      }
      for (std::uint64_t imm : insn.immediates) {
        if (!image.contains(imm) || lands_mid_instruction(graph, imm)) continue;
        graph.add_reference(insn.address, imm, EdgeKind::ImmediateRef);
        work.push(imm);
      }
    }

    const Instruction& last = block.instructions.back();
    if (!image.contains(last.end())) continue;
    if (converged || ends_block(last.kind)) {
      graph.add_reference(last.address, last.end(), continuation_kind(last.kind));
      work.push(last.end());
    }
  }
  return graph;
}

DisasmGraph initial_disassemble(const CodeRegion& region) {
  CodeImage image(region.base, region.bytes);
  return initial_disassemble(image, region.entry_points);
}

}  // namespace disas
