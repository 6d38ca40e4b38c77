#include "program/shape.h"

#include <fmt/format.h>

namespace clonematch {

Shape opcode_shape(Opcode op) {
  switch (op) {
    case Opcode::kMov: return {kR, kR | kI | kC};
    case Opcode::kLoad: return {kR, kM};
    case Opcode::kStore: return {kM, kR | kI | kC};
    case Opcode::kPush: return {kR | kI | kC, kNoOperand};
    case Opcode::kPop: return {kR, kNoOperand};
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kDiv:
    case Opcode::kMod:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr: return {kR, kR | kI};
    case Opcode::kNeg:
    case Opcode::kNot: return {kR, kNoOperand};
    case Opcode::kCmp:
    case Opcode::kTest: return {kR | kI, kR | kI};
    case Opcode::kJmp:
    case Opcode::kJz:
    case Opcode::kJnz:
    case Opcode::kJl:
    case Opcode::kJle:
    case Opcode::kJg:
    case Opcode::kJge:
    case Opcode::kCall: return {kC, kNoOperand};
    case Opcode::kIjmp:
    case Opcode::kIcall: return {kR, kNoOperand};
    case Opcode::kLibcall: return {kL, kNoOperand};
    case Opcode::kRet:
    case Opcode::kHalt: return {kNoOperand, kNoOperand};
  }
  return {kNoOperand, kNoOperand};
}

namespace {

unsigned kind_bit(Operand::Kind k) {
  switch (k) {
    case Operand::Kind::kNone: return kNoOperand;
    case Operand::Kind::kReg: return kR;
    case Operand::Kind::kImm: return kI;
    case Operand::Kind::kMem: return kM;
    case Operand::Kind::kCode: return kC;
    case Operand::Kind::kLib: return kL;
  }
  return kNoOperand;
}

bool fits(unsigned allowed, const Operand& op) {
  if (op.kind == Operand::Kind::kNone) return allowed == kNoOperand;
  return (allowed & kind_bit(op.kind)) != 0;
}

}  // namespace

std::optional<std::string> shape_error(const Instruction& inst) {
  Shape s = opcode_shape(inst.op);
  if (!fits(s.a, inst.a) || !fits(s.b, inst.b)) {
    return fmt::format("bad operands for '{}'", opcode_name(inst.op));
  }
  if (inst.op == Opcode::kLibcall && inst.a.lib.empty()) {
    return std::string("libcall without a name");
  }
  return std::nullopt;
}

}  // namespace clonematch
