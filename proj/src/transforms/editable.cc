#include "transforms/editable.h"

#include <fmt/format.h>

namespace clonematch {

std::string EditModule::fresh_label() { return fmt::format(".L{}", label_counter++); }

EditModule to_editable(const ModuleImage& m) {
  EditModule em;
  std::multimap<Word, std::string> names;
  for (const auto& [name, addr] : m.code_labels) names.emplace(addr, name);

  auto label_for = [&](Word addr) -> std::string {
    auto it = names.find(addr);
    if (it != names.end()) return it->second;
    std::string l = em.fresh_label();
    names.emplace(addr, l);
    return l;
  };

  std::vector<std::string> refs(m.code.size());
  for (std::size_t pc = 0; pc < m.code.size(); ++pc) {
    const Instruction& inst = m.code[pc];
    for (const Operand* op : {&inst.a, &inst.b}) {
      if (op->kind == Operand::Kind::kCode) refs[pc] = label_for(op->value);
    }
  }
  auto convert = [&](const std::vector<DataWord>& words) {
    std::vector<EditData> out;
    for (const DataWord& w : words) {
      out.push_back(EditData{w.value, w.code_ref ? label_for(w.value) : std::string()});
    }
    return out;
  };
  em.data = convert(m.data);
  em.rodata = convert(m.rodata);
  em.data_labels = m.data_labels;

  for (const FunctionEntry& f : m.functions) {
    EditFunction ef;
    ef.name = f.name;
    for (Word pc = f.entry; pc < f.end(); ++pc) {
      EditItem item;
      auto [lo, hi] = names.equal_range(pc);
      for (auto it = lo; it != hi; ++it) item.labels.push_back(it->second);
      item.inst = m.code[pc];
      item.ref = refs[pc];
      ef.items.push_back(std::move(item));
    }
    em.functions.push_back(std::move(ef));
  }
  return em;
}

ModuleImage from_editable(const EditModule& em) {
  ModuleImage m;
  std::map<std::string, Word> labels;
  Word addr = 0;
  for (const EditFunction& f : em.functions) {
    for (const EditItem& item : f.items) {
      for (const std::string& l : item.labels) {
        if (!labels.emplace(l, addr).second) {
          throw ParseError(ParseError::Kind::kDuplicateLabel, 0, 0,
                           fmt::format("label '{}' defined twice", l));
        }
      }
      ++addr;
    }
  }
  auto resolve = [&](const std::string& l) {
    auto it = labels.find(l);
    if (it == labels.end()) {
      throw ParseError(ParseError::Kind::kUnresolvedLabel, 0, 0,
                       fmt::format("label '{}' is not defined", l));
    }
    return it->second;
  };

  for (const EditFunction& f : em.functions) {
    FunctionEntry entry;
    entry.name = f.name;
    entry.entry = static_cast<Word>(m.code.size());
    entry.length = static_cast<Word>(f.items.size());
    for (const EditItem& item : f.items) {
      Instruction inst = item.inst;
      if (!item.ref.empty()) {
        for (Operand* op : {&inst.a, &inst.b}) {
          if (op->kind == Operand::Kind::kCode) op->value = resolve(item.ref);
        }
      }
      m.code.push_back(std::move(inst));
    }
    m.functions.push_back(std::move(entry));
  }
  auto convert = [&](const std::vector<EditData>& words) {
    std::vector<DataWord> out;
    for (const EditData& w : words) {
      out.push_back(w.ref.empty() ? DataWord{w.value, false} : DataWord{resolve(w.ref), true});
    }
    return out;
  };
  m.data = convert(em.data);
  m.rodata = convert(em.rodata);
  m.data_labels = em.data_labels;
  for (const auto& [name, a] : labels) {
    if (!name.starts_with(".L")) m.code_labels[name] = a;
  }
  validate_module(m);
  return m;
}

std::vector<Block> split_blocks(const EditFunction& fn) {
  std::vector<Block> blocks;
  bool start = true;
  for (const EditItem& item : fn.items) {
    if (start || !item.labels.empty()) blocks.emplace_back();
    blocks.back().push_back(item);
    start = ends_block(item.inst.op);
  }
  return blocks;
}

std::vector<EditItem> join_blocks(std::vector<Block> blocks) {
  std::vector<EditItem> out;
  for (Block& b : blocks) {
    for (EditItem& item : b) out.push_back(std::move(item));
  }
  return out;
}

bool falls_through(const Block& b) {
  const Opcode op = b.back().inst.op;
  return op != Opcode::kJmp && op != Opcode::kIjmp && op != Opcode::kRet && op != Opcode::kHalt;
}

bool condition_live_in(const Block& b) {
  for (const EditItem& item : b) {
    if (item.inst.op == Opcode::kCmp || item.inst.op == Opcode::kTest) return false;
    if (is_conditional_jump(item.inst.op)) return true;
  }
  return false;
}

bool falls_off_end(const EditFunction& fn) {
  if (fn.items.empty()) return false;
  Block last{fn.items.back()};
  return falls_through(last);
}

EditItem make_item(Opcode op, Operand a, Operand b) {
  EditItem item;
  item.inst = Instruction{op, std::move(a), std::move(b)};
  return item;
}

EditItem make_jump(Opcode op, std::string label) {
  EditItem item = make_item(op, Operand::code(0));
  item.ref = std::move(label);
  return item;
}

}  // namespace clonematch
