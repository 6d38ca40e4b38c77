#pragma once

// Semantic features, signatures and the library-call catalog.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clonematch/program.h"

namespace clonematch {

enum class LibFunc : std::uint8_t {
  kMalloc, kFree, kReadInt, kRand, kTime,     // system
  kMemcpy, kMemset, kStrlen, kAbs, kMin, kMax,  // pure
  kPrintInt,                                  // output
};

// System calls are migrated during emulation, pure ones are executed and
// output calls become no-ops returning 0.
enum class LibClass : std::uint8_t { kSystem, kPure, kOutput };

std::optional<LibFunc> lookup_libcall(std::string_view name);
std::string_view libcall_name(LibFunc f);
LibClass libcall_class(LibFunc f);
std::string_view libclass_name(LibClass c);
// Number of stack arguments the call reads ([sp], [sp+1], ...).
int libcall_arity(LibFunc f);

// Throws std::invalid_argument for unknown names.
LibClass classify_libcall(std::string_view name);

struct Feature {
  enum class Kind : std::uint8_t { kRead, kWrite, kCompare, kLibCall };

  Kind kind = Kind::kRead;
  Word first = 0;   // value, low comparison operand, or LibFunc
  Word second = 0;  // high comparison operand

  static Feature read(Word v) { return {Kind::kRead, v, 0}; }
  static Feature write(Word v) { return {Kind::kWrite, v, 0}; }
  // Comparison operands are stored sorted (unsigned), so swapping the
  // operands of a comparison leaves the feature unchanged.
  static Feature compare(Word x, Word y) {
    return x <= y ? Feature{Kind::kCompare, x, y} : Feature{Kind::kCompare, y, x};
  }
  static Feature libcall(LibFunc f) {
    return {Kind::kLibCall, static_cast<Word>(f), 0};
  }

  friend bool operator==(const Feature&, const Feature&) = default;
};

using Signature = std::vector<Feature>;

// One line of a SIG block: `R <v>`, `W <v>`, `C <v1> <v2>` or `L <name>`.
std::string format_feature(const Feature& f);
std::optional<Feature> parse_feature(std::string_view line);

// Writes `SIG <len>` followed by one line per feature.
void write_signature(std::ostream& out, const Signature& sig);

// Reads the first SIG block of a stream. Throws std::runtime_error on
// malformed input or when no block is present.
Signature read_signature(std::istream& in);

std::string hex_word(Word v);  // 0x%08x

}  // namespace clonematch
