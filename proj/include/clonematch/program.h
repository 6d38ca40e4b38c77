#pragma once

// MiniVM program model: instruction set, module image, parser/printer and
// the static analyses the matcher relies on.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clonematch {

using Word = std::uint32_t;

// Address-space layout. Memory is word addressed; code lives in its own
// space and is addressed by instruction index.
inline constexpr Word kDataBase = 0x1000;
inline constexpr Word kRodataBase = 0x2000;
inline constexpr Word kRegionSize = 0x1000;
inline constexpr Word kHeapBase = 0x8000;
inline constexpr Word kStackTop = 0xF000;
inline constexpr Word kFiller = 0xDEADBEEF;
// Return address pushed for the outermost activation of a run.
inline constexpr Word kSyntheticReturn = 0xFFFFFFFF;

inline constexpr bool in_data(Word addr) {
  return addr >= kDataBase && addr < kDataBase + kRegionSize;
}
inline constexpr bool in_rodata(Word addr) {
  return addr >= kRodataBase && addr < kRodataBase + kRegionSize;
}

enum class Reg : std::uint8_t { r0, r1, r2, r3, r4, r5, r6, r7, sp, fp };
inline constexpr int kRegCount = 10;

std::string_view reg_name(Reg r);
std::optional<Reg> parse_reg(std::string_view s);

enum class Opcode : std::uint8_t {
  kMov, kLoad, kStore, kPush, kPop,
  kAdd, kSub, kMul, kDiv, kMod, kAnd, kOr, kXor, kShl, kShr,
  kNeg, kNot,
  kCmp, kTest,
  kJmp, kJz, kJnz, kJl, kJle, kJg, kJge,
  kIjmp, kCall, kIcall, kRet, kLibcall, kHalt,
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view s);

bool is_conditional_jump(Opcode op);
// Instructions after which control never falls through.
bool ends_block(Opcode op);
bool is_binary_arith(Opcode op);

struct Operand {
  enum class Kind : std::uint8_t { kNone, kReg, kImm, kMem, kCode, kLib };

  Kind kind = Kind::kNone;
  Reg reg = Reg::r0;       // kReg, or base register of kMem when has_base
  bool has_base = false;   // kMem only
  Word value = 0;          // kImm value, kMem displacement/absolute, kCode address
  std::string lib;         // kLib

  static Operand none() { return {}; }
  static Operand of_reg(Reg r) { return {Kind::kReg, r, false, 0, {}}; }
  static Operand imm(Word v) { return {Kind::kImm, Reg::r0, false, v, {}}; }
  static Operand code(Word addr) { return {Kind::kCode, Reg::r0, false, addr, {}}; }
  static Operand mem_abs(Word addr) { return {Kind::kMem, Reg::r0, false, addr, {}}; }
  static Operand mem(Reg base, std::int32_t disp) {
    return {Kind::kMem, base, true, static_cast<Word>(disp), {}};
  }
  static Operand libcall(std::string name) {
    return {Kind::kLib, Reg::r0, false, 0, std::move(name)};
  }

  std::int32_t disp() const { return static_cast<std::int32_t>(value); }

  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
  Opcode op = Opcode::kHalt;
  Operand a;
  Operand b;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct FunctionEntry {
  std::optional<std::string> name;
  Word entry = 0;
  Word length = 0;

  Word end() const { return entry + length; }
  bool contains(Word addr) const { return addr >= entry && addr < end(); }
  std::string display_name() const { return name ? *name : "?"; }

  friend bool operator==(const FunctionEntry&, const FunctionEntry&) = default;
};

// A data or rodata word. Code-address literals (`@label`) are flagged so
// that layout-changing transforms can relocate them.
struct DataWord {
  Word value = 0;
  bool code_ref = false;

  friend bool operator==(const DataWord&, const DataWord&) = default;
};

struct ModuleImage {
  std::vector<DataWord> data;    // based at kDataBase
  std::vector<DataWord> rodata;  // based at kRodataBase
  std::vector<Instruction> code;
  std::vector<FunctionEntry> functions;  // sorted by entry address
  std::map<std::string, Word> code_labels;
  std::map<std::string, Word> data_labels;

  // Index of the function containing `addr`, if any.
  std::optional<std::size_t> function_at(Word addr) const;
  // Index of the function whose entry is `addr`.
  std::optional<std::size_t> function_entry_at(Word addr) const;
  std::optional<std::size_t> find_function(std::string_view name) const;

  friend bool operator==(const ModuleImage&, const ModuleImage&) = default;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind {
    kSyntax,
    kUnresolvedLabel,
    kDuplicateLabel,
    kOperandShape,
    kOverlappingFunctions,
    kBadCallTarget,
    kCrossFunctionJump,
    kLayout,
  };

  ParseError(Kind kind, int line, int column, const std::string& message);

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Kind kind_;
  int line_;
  int column_;
};

std::string_view parse_error_kind_name(ParseError::Kind kind);

// Parses module source text. Throws ParseError.
ModuleImage parse_module(std::string_view text);

// Checks structural invariants of an image (also applied by parse_module).
// Throws ParseError with line/column 0.
void validate_module(const ModuleImage& module);

// Renders source text that parse_module accepts. Referenced code addresses
// without a label get a synthesized `.L<hex>` label; anonymous functions are
// written as `func:`.
std::string print_module(const ModuleImage& module);

std::string format_instruction(const Instruction& inst,
                               const std::map<Word, std::string>& code_names);

// Static argument count under the stack calling convention: argument i
// (1-based) lives at [fp+1+i], so the count is max(d) - 1 over all [fp+d]
// operands with d >= 2.
int detect_arg_count(const ModuleImage& module, const FunctionEntry& fn);

// Removes every function and label name.
ModuleImage strip(const ModuleImage& module);

}  // namespace clonematch
