#include "disas/decode.hpp"

#include <capstone/capstone.h>

#include <algorithm>
#include <stdexcept>

namespace disas {

namespace {

// One Capstone handle per thread; cs_disasm_iter is not reentrant on a handle.
class CapstoneHandle {
 public:
  CapstoneHandle() {
    if (cs_open(CS_ARCH_X86, CS_MODE_64, &handle_) != CS_ERR_OK) {
      throw std::runtime_error("capstone: cs_open failed");
    }
    cs_option(handle_, CS_OPT_DETAIL, CS_OPT_ON);
    insn_ = cs_malloc(handle_);
  }
  ~CapstoneHandle() {
    cs_free(insn_, 1);
    cs_close(&handle_);
  }
  CapstoneHandle(const CapstoneHandle&) = delete;
  CapstoneHandle& operator=(const CapstoneHandle&) = delete;

  const cs_insn* decode(const std::uint8_t* data, std::size_t size, Address address) {
    const std::uint8_t* code = data;
    std::size_t remaining = size;
    std::uint64_t ip = address;
    if (!cs_disasm_iter(handle_, &code, &remaining, &ip, insn_)) return nullptr;
    return insn_;
  }

  bool in_group(std::uint8_t group) const { return cs_insn_group(handle_, insn_, group); }

 private:
  csh handle_ = 0;
  cs_insn* insn_ = nullptr;
};

CapstoneHandle& thread_handle() {
  thread_local CapstoneHandle handle;
  return handle;
}

Instruction bad_instruction(Address address) {
  Instruction insn;
  insn.address = address;
  insn.length = 1;
  insn.mnemonic = "(bad)";
  insn.kind = InsnKind::Invalid;
  return insn;
}

InsnKind classify_kind(const cs_insn& raw, const CapstoneHandle& cs) {
  if (raw.id == X86_INS_HLT || raw.id == X86_INS_UD2) return InsnKind::Halt;
  if (cs.in_group(CS_GRP_RET) || cs.in_group(CS_GRP_IRET)) return InsnKind::Return;
  if (cs.in_group(CS_GRP_CALL)) return InsnKind::Call;
  if (cs.in_group(CS_GRP_JUMP)) {
    return raw.id == X86_INS_JMP || raw.id == X86_INS_LJMP ? InsnKind::UnconditionalBranch
                                                            : InsnKind::ConditionalBranch;
  }
  return InsnKind::Sequential;
}

}  // namespace

const char* to_string(InsnKind kind) {
  switch (kind) {
    case InsnKind::Sequential: return "sequential";
    case InsnKind::ConditionalBranch: return "conditional-branch";
    case InsnKind::UnconditionalBranch: return "unconditional-branch";
    case InsnKind::Call: return "call";
    case InsnKind::Return: return "return";
    case InsnKind::Halt: return "halt";
    case InsnKind::Invalid: return "invalid-encoding";
  }
  return "?";
}

std::string Instruction::text() const {
  if (operands.empty()) return mnemonic;
  return mnemonic + " " + operands;
}

Instruction decode_at(ByteView bytes, Address base, std::size_t offset) {
  if (offset >= bytes.size()) {
    throw std::out_of_range("decode_at: offset past end of code region");
  }
  const Address address = base + offset;
  const std::size_t window = std::min(kMaxInstructionLength, bytes.size() - offset);
  auto& cs = thread_handle();
  const cs_insn* raw = cs.decode(bytes.data() + offset, window, address);
  if (raw == nullptr) return bad_instruction(address);

  Instruction insn;
  insn.address = address;
  insn.length = static_cast<std::uint8_t>(raw->size);
  insn.mnemonic = raw->mnemonic;
  insn.operands = raw->op_str;
  insn.kind = classify_kind(*raw, cs);

  const cs_x86& x86 = raw->detail->x86;
  const bool transfers = insn.kind == InsnKind::ConditionalBranch ||
                         insn.kind == InsnKind::UnconditionalBranch ||
                         insn.kind == InsnKind::Call;
  if (transfers) {
    if (x86.op_count == 1 && x86.operands[0].type == X86_OP_IMM) {
      insn.branch_target = static_cast<Address>(x86.operands[0].imm);
    }
    return insn;
  }
  if (x86.encoding.imm_size >= 2) {
    for (std::uint8_t i = 0; i < x86.op_count; ++i) {
      if (x86.operands[i].type == X86_OP_IMM) {
        insn.immediates.push_back(static_cast<std::uint64_t>(x86.operands[i].imm));
      }
    }
  }
  return insn;
}

std::vector<Instruction> reverse_decode(ByteView bytes, Address base, Address end,
                                        const std::set<Address>& excluded) {
  std::vector<Instruction> out;
  if (end <= base || end > base + bytes.size()) return out;
  const Address lowest = end - std::min<Address>(kMaxInstructionLength, end - base);
  for (Address start = lowest; start < end; ++start) {
    if (excluded.contains(start)) continue;
    Instruction insn = decode_at(bytes, base, start - base);
    if (insn.valid_encoding() && insn.end() == end) out.push_back(std::move(insn));
  }
  return out;
}

std::vector<Instruction> reverse_tree_bfs(ByteView bytes, Address base, Address root_end,
                                          const std::set<Address>& excluded,
                                          std::size_t limit) {
  std::vector<Instruction> out;
  std::set<Address> seen;
  std::vector<Address> level{root_end};
  while (!level.empty() && out.size() < limit) {
    std::vector<Instruction> children;
    for (Address node : level) {
      for (auto& insn : reverse_decode(bytes, base, node, excluded)) {
        if (seen.insert(insn.address).second) children.push_back(std::move(insn));
      }
    }
    std::ranges::sort(children, {}, &Instruction::address);
    level.clear();
    for (auto& insn : children) {
      if (out.size() == limit) break;
      level.push_back(insn.address);
      out.push_back(std::move(insn));
    }
  }
  return out;
}

CodeImage::CodeImage(Address base, std::vector<std::uint8_t> bytes)
    : base_(base), bytes_(std::move(bytes)), cache_(bytes_.size()) {}

const Instruction& CodeImage::at(Address a) const {
  if (!contains(a)) throw std::out_of_range("CodeImage::at: address outside region");
  auto& slot = cache_[a - base_];
  if (!slot) slot = decode_at(bytes_, base_, a - base_);
  return *slot;
}

}  // namespace disas
