#pragma once

#include <optional>
#include <string>

#include "clonematch/program.h"

namespace clonematch {

// Bit set of operand kinds accepted by one operand slot.
enum ShapeBits : unsigned {
  kNoOperand = 0,
  kR = 1u << 0,
  kI = 1u << 1,
  kM = 1u << 2,
  kC = 1u << 3,
  kL = 1u << 4,
};

struct Shape {
  unsigned a;
  unsigned b;
};

Shape opcode_shape(Opcode op);

// Returns a diagnostic when the instruction's operands don't fit its opcode.
std::optional<std::string> shape_error(const Instruction& inst);

struct ValidationIssue {
  ParseError::Kind kind;
  std::optional<Word> pc;
  std::string message;
};

std::optional<ValidationIssue> find_validation_issue(const ModuleImage& module);

}  // namespace clonematch
