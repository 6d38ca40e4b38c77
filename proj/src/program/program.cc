#include "clonematch/program.h"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "program/shape.h"

namespace clonematch {

namespace {

constexpr std::array<std::string_view, kRegCount> kRegNames = {
    "r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "sp", "fp"};

constexpr std::array<std::string_view, 32> kOpcodeNames = {
    "mov", "load", "store", "push", "pop",
    "add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr",
    "neg", "not",
    "cmp", "test",
    "jmp", "jz", "jnz", "jl", "jle", "jg", "jge",
    "ijmp", "call", "icall", "ret", "libcall", "halt"};

}  // namespace

std::string_view reg_name(Reg r) { return kRegNames[static_cast<int>(r)]; }

std::optional<Reg> parse_reg(std::string_view s) {
  for (int i = 0; i < kRegCount; ++i) {
    if (kRegNames[i] == s) return static_cast<Reg>(i);
  }
  return std::nullopt;
}

std::string_view opcode_name(Opcode op) {
  return kOpcodeNames[static_cast<int>(op)];
}

std::optional<Opcode> parse_opcode(std::string_view s) {
  for (std::size_t i = 0; i < kOpcodeNames.size(); ++i) {
    if (kOpcodeNames[i] == s) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

bool is_conditional_jump(Opcode op) {
  return op >= Opcode::kJz && op <= Opcode::kJge;
}

bool ends_block(Opcode op) {
  return op == Opcode::kJmp || is_conditional_jump(op) || op == Opcode::kIjmp ||
         op == Opcode::kRet || op == Opcode::kHalt;
}

bool is_binary_arith(Opcode op) {
  return op >= Opcode::kAdd && op <= Opcode::kShr;
}

std::optional<std::size_t> ModuleImage::function_at(Word addr) const {
  auto it = std::upper_bound(
      functions.begin(), functions.end(), addr,
      [](Word a, const FunctionEntry& f) { return a < f.entry; });
  if (it == functions.begin()) return std::nullopt;
  --it;
  if (!it->contains(addr)) return std::nullopt;
  return static_cast<std::size_t>(it - functions.begin());
}

std::optional<std::size_t> ModuleImage::function_entry_at(Word addr) const {
  auto idx = function_at(addr);
  if (idx && functions[*idx].entry == addr) return idx;
  return std::nullopt;
}

std::optional<std::size_t> ModuleImage::find_function(std::string_view name) const {
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name && *functions[i].name == name) return i;
  }
  return std::nullopt;
}

ParseError::ParseError(Kind kind, int line, int column, const std::string& message)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}: {}", line, column,
                                                parse_error_kind_name(kind), message)
                                  : fmt::format("{}: {}", parse_error_kind_name(kind),
                                                message)),
      kind_(kind),
      line_(line),
      column_(column) {}

std::string_view parse_error_kind_name(ParseError::Kind kind) {
  switch (kind) {
    case ParseError::Kind::kSyntax: return "syntax error";
    case ParseError::Kind::kUnresolvedLabel: return "unresolved label";
    case ParseError::Kind::kDuplicateLabel: return "duplicate label";
    case ParseError::Kind::kOperandShape: return "operand shape mismatch";
    case ParseError::Kind::kOverlappingFunctions: return "overlapping functions";
    case ParseError::Kind::kBadCallTarget: return "call target is not a function entry";
    case ParseError::Kind::kCrossFunctionJump: return "jump leaves its function";
    case ParseError::Kind::kLayout: return "layout error";
  }
  return "error";
}

std::optional<ValidationIssue> find_validation_issue(const ModuleImage& m) {
  using K = ParseError::Kind;
  const Word code_size = static_cast<Word>(m.code.size());
  if (m.data.size() > kRegionSize) {
    return ValidationIssue{K::kLayout, std::nullopt, ".data overflows into .rodata"};
  }
  if (m.rodata.size() > kRegionSize) {
    return ValidationIssue{K::kLayout, std::nullopt, ".rodata exceeds its region"};
  }
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    const FunctionEntry& f = m.functions[i];
    if (f.length == 0) {
      return ValidationIssue{K::kLayout, f.entry,
                             fmt::format("function {} is empty", f.display_name())};
    }
    if (f.end() > code_size || f.end() < f.entry) {
      return ValidationIssue{
          K::kLayout, std::nullopt,
          fmt::format("function {} extends past the code", f.display_name())};
    }
    if (i > 0 && m.functions[i - 1].end() > f.entry) {
      return ValidationIssue{K::kOverlappingFunctions, f.entry,
                             fmt::format("{} overlaps {}", f.display_name(),
                                         m.functions[i - 1].display_name())};
    }
  }
  for (Word pc = 0; pc < code_size; ++pc) {
    const Instruction& inst = m.code[pc];
    if (auto err = shape_error(inst)) {
      return ValidationIssue{K::kOperandShape, pc, *err};
    }
    for (const Operand* op : {&inst.a, &inst.b}) {
      if (op->kind == Operand::Kind::kCode && op->value >= code_size) {
        return ValidationIssue{
            K::kUnresolvedLabel, pc,
            fmt::format("code address {:#x} out of range", op->value)};
      }
    }
    if (inst.op == Opcode::kCall && !m.function_entry_at(inst.a.value)) {
      return ValidationIssue{K::kBadCallTarget, pc,
                             fmt::format("target {:#x}", inst.a.value)};
    }
    if (inst.op == Opcode::kJmp || is_conditional_jump(inst.op)) {
      if (m.function_at(pc) != m.function_at(inst.a.value)) {
        return ValidationIssue{K::kCrossFunctionJump, pc,
                               fmt::format("target {:#x}", inst.a.value)};
      }
    }
  }
  for (const auto* region : {&m.data, &m.rodata}) {
    for (const DataWord& w : *region) {
      if (w.code_ref && w.value >= code_size) {
        return ValidationIssue{
            K::kUnresolvedLabel, std::nullopt,
            fmt::format("code literal {:#x} out of range", w.value)};
      }
    }
  }
  return std::nullopt;
}

void validate_module(const ModuleImage& m) {
  if (auto issue = find_validation_issue(m)) {
    std::string where = issue->pc ? fmt::format("at {:#x}: ", *issue->pc) : "";
    throw ParseError(issue->kind, 0, 0, where + issue->message);
  }
}

int detect_arg_count(const ModuleImage& module, const FunctionEntry& fn) {
  std::int32_t max_disp = 1;
  for (Word pc = fn.entry; pc < fn.end() && pc < module.code.size(); ++pc) {
    const Instruction& inst = module.code[pc];
    for (const Operand* op : {&inst.a, &inst.b}) {
      if (op->kind == Operand::Kind::kMem && op->has_base && op->reg == Reg::fp) {
        max_disp = std::max(max_disp, op->disp());
      }
    }
  }
  return max_disp - 1;
}

ModuleImage strip(const ModuleImage& module) {
  ModuleImage out = module;
  for (FunctionEntry& f : out.functions) f.name.reset();
  out.code_labels.clear();
  out.data_labels.clear();
  return out;
}

}  // namespace clonematch
