#include <set>

#include <fmt/format.h>

#include "clonematch/program.h"

namespace clonematch {

namespace {

std::string format_imm(Word v) {
  if (v < 0x10000) return fmt::format("{}", v);
  return fmt::format("{:#x}", v);
}

std::string format_operand(const Operand& op, const std::map<Word, std::string>& names,
                           bool bare_code) {
  switch (op.kind) {
    case Operand::Kind::kNone: return "";
    case Operand::Kind::kReg: return std::string(reg_name(op.reg));
    case Operand::Kind::kImm: return format_imm(op.value);
    case Operand::Kind::kLib: return op.lib;
    case Operand::Kind::kCode: {
      auto it = names.find(op.value);
      std::string name = it != names.end() ? it->second : fmt::format("{}", op.value);
      return bare_code ? name : "@" + name;
    }
    case Operand::Kind::kMem: {
      if (!op.has_base) return fmt::format("[{:#x}]", op.value);
      const std::int32_t d = op.disp();
      if (d == 0) return fmt::format("[{}]", reg_name(op.reg));
      if (d > 0) return fmt::format("[{}+{}]", reg_name(op.reg), d);
      return fmt::format("[{}-{}]", reg_name(op.reg),
                         static_cast<std::uint32_t>(0u - op.value));
    }
  }
  return "";
}

}  // namespace

std::string format_instruction(const Instruction& inst,
                               const std::map<Word, std::string>& code_names) {
  const bool bare = inst.op == Opcode::kJmp || is_conditional_jump(inst.op) ||
                    inst.op == Opcode::kCall;
  std::string out(opcode_name(inst.op));
  if (inst.a.kind != Operand::Kind::kNone) {
    out += " " + format_operand(inst.a, code_names, bare);
  }
  if (inst.b.kind != Operand::Kind::kNone) {
    out += ", " + format_operand(inst.b, code_names, bare);
  }
  return out;
}

std::string print_module(const ModuleImage& m) {
  // One display name per referenced or labelled code address.
  std::map<Word, std::string> names;
  std::set<std::string> taken;
  for (const auto& [name, addr] : m.code_labels) {
    names.emplace(addr, name);  // map order keeps the lexicographically first
    taken.insert(name);
  }
  for (const auto& [name, addr] : m.data_labels) taken.insert(name);
  for (const FunctionEntry& f : m.functions) {
    if (f.name) names[f.entry] = *f.name;
  }
  auto synthesize = [&](Word addr) {
    if (names.count(addr)) return;
    std::string name = fmt::format(".L{:x}", addr);
    while (taken.count(name)) name += "_";
    taken.insert(name);
    names.emplace(addr, name);
  };
  for (const Instruction& inst : m.code) {
    for (const Operand* op : {&inst.a, &inst.b}) {
      if (op->kind == Operand::Kind::kCode) synthesize(op->value);
    }
  }
  for (const auto* region : {&m.data, &m.rodata}) {
    for (const DataWord& w : *region) {
      if (w.code_ref) synthesize(w.value);
    }
  }

  std::string out = "; clonematch-v1 module\n";

  auto print_region = [&](const char* directive, const std::vector<DataWord>& words,
                          Word base) {
    std::multimap<Word, std::string> labels;
    for (const auto& [name, addr] : m.data_labels) {
      if (addr >= base && addr <= base + words.size()) labels.emplace(addr, name);
    }
    if (words.empty() && labels.empty()) return;
    out += fmt::format("{}\n", directive);
    std::size_t i = 0;
    while (i < words.size() || labels.count(base + static_cast<Word>(i))) {
      auto [lo, hi] = labels.equal_range(base + static_cast<Word>(i));
      for (auto it = lo; it != hi; ++it) out += fmt::format("{}:\n", it->second);
      if (i >= words.size()) break;
      // A line runs until the next labelled address, at most eight words.
      std::string line = "  .word ";
      std::size_t n = 0;
      do {
        const DataWord& w = words[i];
        if (n > 0) line += ", ";
        line += w.code_ref ? "@" + names.at(w.value) : format_imm(w.value);
        ++i;
        ++n;
      } while (i < words.size() && n < 8 && !labels.count(base + static_cast<Word>(i)));
      out += line + "\n";
    }
  };
  print_region(".data", m.data, kDataBase);
  print_region(".rodata", m.rodata, kRodataBase);

  std::multimap<Word, std::string> code_labels;
  for (const auto& [name, addr] : m.code_labels) code_labels.emplace(addr, name);
  for (const auto& [addr, name] : names) {
    if (!m.code_labels.count(name)) code_labels.emplace(addr, name);
  }

  out += ".text\n";
  for (std::size_t fi = 0; fi < m.functions.size(); ++fi) {
    const FunctionEntry& f = m.functions[fi];
    out += f.name ? fmt::format("func {}:\n", *f.name) : std::string("func:\n");
    const bool last = fi + 1 == m.functions.size();
    for (Word pc = f.entry; pc <= f.end(); ++pc) {
      // Labels at the end address belong to the next function unless this is
      // the last one.
      if (pc == f.end() && !(last || m.functions[fi + 1].entry != pc)) break;
      auto [lo, hi] = code_labels.equal_range(pc);
      for (auto it = lo; it != hi; ++it) {
        if (f.name && pc == f.entry && it->second == *f.name) continue;
        out += fmt::format("{}:\n", it->second);
      }
      if (pc < f.end()) out += "  " + format_instruction(m.code[pc], names) + "\n";
    }
    out += "endfunc\n";
  }
  return out;
}

}  // namespace clonematch
