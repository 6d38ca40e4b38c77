#include "clonematch/feature.h"

#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "trace/text_util.h"

namespace clonematch {

namespace {

struct LibInfo {
  std::string_view name;
  LibClass cls;
  int arity;
};

constexpr std::array<LibInfo, 12> kLibs = {{
    {"malloc", LibClass::kSystem, 1},
    {"free", LibClass::kSystem, 1},
    {"read_int", LibClass::kSystem, 0},
    {"rand", LibClass::kSystem, 0},
    {"time", LibClass::kSystem, 0},
    {"memcpy", LibClass::kPure, 3},
    {"memset", LibClass::kPure, 3},
    {"strlen", LibClass::kPure, 1},
    {"abs", LibClass::kPure, 1},
    {"min", LibClass::kPure, 2},
    {"max", LibClass::kPure, 2},
    {"print_int", LibClass::kOutput, 1},
}};

}  // namespace

std::optional<LibFunc> lookup_libcall(std::string_view name) {
  for (std::size_t i = 0; i < kLibs.size(); ++i) {
    if (kLibs[i].name == name) return static_cast<LibFunc>(i);
  }
  return std::nullopt;
}

std::string_view libcall_name(LibFunc f) { return kLibs[static_cast<int>(f)].name; }
LibClass libcall_class(LibFunc f) { return kLibs[static_cast<int>(f)].cls; }
int libcall_arity(LibFunc f) { return kLibs[static_cast<int>(f)].arity; }

std::string_view libclass_name(LibClass c) {
  switch (c) {
    case LibClass::kSystem: return "system";
    case LibClass::kPure: return "pure";
    case LibClass::kOutput: return "output";
  }
  return "?";
}

LibClass classify_libcall(std::string_view name) {
  auto f = lookup_libcall(name);
  if (!f) throw std::invalid_argument(fmt::format("unknown libcall '{}'", name));
  return libcall_class(*f);
}

std::string hex_word(Word v) { return fmt::format("{:#010x}", v); }

std::string format_feature(const Feature& f) {
  switch (f.kind) {
    case Feature::Kind::kRead: return "R " + hex_word(f.first);
    case Feature::Kind::kWrite: return "W " + hex_word(f.first);
    case Feature::Kind::kCompare:
      return "C " + hex_word(f.first) + " " + hex_word(f.second);
    case Feature::Kind::kLibCall:
      return "L " + std::string(libcall_name(static_cast<LibFunc>(f.first)));
  }
  return "?";
}

std::optional<Feature> parse_feature(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.empty()) return std::nullopt;
  const std::string_view tag = fields[0];
  if ((tag == "R" || tag == "W") && fields.size() == 2) {
    auto v = parse_word(fields[1]);
    if (!v) return std::nullopt;
    return tag == "R" ? Feature::read(*v) : Feature::write(*v);
  }
  if (tag == "C" && fields.size() == 3) {
    auto x = parse_word(fields[1]);
    auto y = parse_word(fields[2]);
    if (!x || !y) return std::nullopt;
    return Feature::compare(*x, *y);
  }
  if (tag == "L" && fields.size() == 2) {
    auto f = lookup_libcall(fields[1]);
    if (!f) return std::nullopt;
    return Feature::libcall(*f);
  }
  return std::nullopt;
}

void write_signature(std::ostream& out, const Signature& sig) {
  out << "SIG " << sig.size() << '\n';
  for (const Feature& f : sig) out << format_feature(f) << '\n';
}

Signature read_signature(std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_fields(line);
    if (fields.size() != 2 || fields[0] != "SIG") continue;
    auto n = parse_word(fields[1]);
    if (!n) throw std::runtime_error(fmt::format("line {}: bad SIG length", lineno));
    Signature sig;
    sig.reserve(*n);
    for (Word i = 0; i < *n; ++i) {
      if (!std::getline(in, line)) {
        throw std::runtime_error(
            fmt::format("SIG block truncated: expected {} features, got {}", *n, i));
      }
      ++lineno;
      auto f = parse_feature(line);
      if (!f) throw std::runtime_error(fmt::format("line {}: bad feature '{}'", lineno, line));
      sig.push_back(*f);
    }
    return sig;
  }
  throw std::runtime_error("no SIG block found");
}

}  // namespace clonematch
