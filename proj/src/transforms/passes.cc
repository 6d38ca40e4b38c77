#include <algorithm>
#include <array>
#include <bit>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "clonematch/rng.h"
#include "clonematch/transforms.h"
#include "transforms/editable.h"

namespace clonematch {

namespace {

constexpr std::array<Reg, 7> kScratch = {Reg::r1, Reg::r2, Reg::r3, Reg::r4,
                                         Reg::r5, Reg::r6, Reg::r7};

Operand R(Reg r) { return Operand::of_reg(r); }
Operand I(Word v) { return Operand::imm(v); }

Reg random_scratch(Rng& rng) { return kScratch[rng.below(kScratch.size())]; }

void map_registers(Instruction& inst, const std::array<Reg, kRegCount>& perm) {
  for (Operand* op : {&inst.a, &inst.b}) {
    if (op->kind == Operand::Kind::kReg || (op->kind == Operand::Kind::kMem && op->has_base)) {
      op->reg = perm[static_cast<int>(op->reg)];
    }
  }
}

bool is_reg(const Operand& op) { return op.kind == Operand::Kind::kReg; }
bool is_gpr(const Operand& op) { return is_reg(op) && op.reg <= Reg::r7; }
bool is_imm(const Operand& op) { return op.kind == Operand::Kind::kImm; }

}  // namespace

std::string_view pass_name(Pass p) {
  switch (p) {
    case Pass::kRename: return "rename";
    case Pass::kSubst: return "subst";
    case Pass::kReorder: return "reorder";
    case Pass::kBcf: return "bcf";
    case Pass::kFla: return "fla";
    case Pass::kInline: return "inline";
  }
  return "?";
}

std::optional<Pass> parse_pass(std::string_view name) {
  for (Pass p : {Pass::kRename, Pass::kSubst, Pass::kReorder, Pass::kBcf, Pass::kFla,
                 Pass::kInline}) {
    if (pass_name(p) == name) return p;
  }
  return std::nullopt;
}

std::vector<Pass> parse_pass_list(std::string_view list) {
  std::vector<Pass> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    const std::string_view item = list.substr(start, comma - start);
    auto p = parse_pass(item);
    if (!p) throw std::invalid_argument(fmt::format("unknown pass '{}'", item));
    out.push_back(*p);
    start = comma + 1;
  }
  return out;
}

ModuleImage rename_registers(const ModuleImage& m, std::uint64_t seed) {
  EditModule em = to_editable(m);
  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    Rng rng(mix_seed(seed, f));
    std::vector<Reg> shuffled(kScratch.begin(), kScratch.end());
    rng.shuffle(shuffled);
    std::array<Reg, kRegCount> perm{};
    for (int r = 0; r < kRegCount; ++r) perm[r] = static_cast<Reg>(r);
    for (std::size_t i = 0; i < kScratch.size(); ++i) {
      perm[static_cast<int>(kScratch[i])] = shuffled[i];
    }
    for (EditItem& item : em.functions[f].items) map_registers(item.inst, perm);
  }
  return from_editable(em);
}

ModuleImage substitute_instructions(const ModuleImage& m, std::uint64_t seed,
                                    double probability) {
  EditModule em = to_editable(m);
  Rng rng(seed);
  for (EditFunction& fn : em.functions) {
    for (EditItem& item : fn.items) {
      Instruction& inst = item.inst;
      const Opcode op = inst.op;
      // Decide first so the random stream does not depend on the catalog.
      const bool apply = rng.chance(probability);
      if (!apply) continue;
      if ((op == Opcode::kAdd || op == Opcode::kSub) && is_imm(inst.b) && inst.b.value != 0) {
        // x + k == x - (2^32 - k)
        inst.op = op == Opcode::kAdd ? Opcode::kSub : Opcode::kAdd;
        inst.b = I(0u - inst.b.value);
      } else if (op == Opcode::kMov && is_gpr(inst.a) && is_imm(inst.b) && inst.b.value == 0) {
        inst = Instruction{Opcode::kXor, inst.a, inst.a};
      } else if (op == Opcode::kMul && is_imm(inst.b) && inst.b.value > 1 &&
                 std::has_single_bit(inst.b.value)) {
        inst = Instruction{Opcode::kShl, inst.a,
                           I(static_cast<Word>(std::countr_zero(inst.b.value)))};
      } else if (op == Opcode::kTest && is_gpr(inst.a) && inst.a == inst.b) {
        inst = Instruction{Opcode::kCmp, inst.a, I(0)};
      } else if (op == Opcode::kCmp && is_gpr(inst.a) && is_imm(inst.b) && inst.b.value == 0) {
        inst = Instruction{Opcode::kTest, inst.a, inst.a};
      }
    }
  }
  return from_editable(em);
}

ModuleImage reorder_blocks(const ModuleImage& m, std::uint64_t seed) {
  EditModule em = to_editable(m);
  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    EditFunction& fn = em.functions[f];
    if (falls_off_end(fn)) continue;
    std::vector<Block> blocks = split_blocks(fn);
    if (blocks.size() < 3) continue;

    // Every fall-through successor needs a label to be jumped to.
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
      if (falls_through(blocks[i]) && blocks[i + 1].front().labels.empty()) {
        blocks[i + 1].front().labels.push_back(em.fresh_label());
      }
    }
    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, f));
    std::vector<std::size_t> rest(order.begin() + 1, order.end());
    rng.shuffle(rest);
    std::copy(rest.begin(), rest.end(), order.begin() + 1);

    std::vector<Block> placed;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      Block b = blocks[i];
      const bool next_is_successor = k + 1 < order.size() && order[k + 1] == i + 1;
      if (falls_through(b) && !next_is_successor) {
        b.push_back(make_jump(Opcode::kJmp, blocks[i + 1].front().labels.front()));
      }
      placed.push_back(std::move(b));
    }
    fn.items = join_blocks(std::move(placed));
  }
  return from_editable(em);
}

ModuleImage bogus_control_flow(const ModuleImage& m, std::uint64_t seed, double probability) {
  EditModule em = to_editable(m);
  // Numbering continues past junk from an earlier application.
  int junk_counter = 0;
  for (const auto& [name, addr] : m.code_labels) {
    if (name.starts_with(kJunkLabelPrefix)) ++junk_counter;
  }
  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    EditFunction& fn = em.functions[f];
    if (falls_off_end(fn)) continue;
    Rng rng(mix_seed(seed, f));
    std::vector<Block> blocks = split_blocks(fn);
    std::vector<Block> out;
    std::vector<Block> junk;
    for (Block& b : blocks) {
      const bool pick = rng.chance(probability);
      if (!pick || condition_live_in(b)) {
        out.push_back(std::move(b));
        continue;
      }
      // x * (x + 1) is even for every 32-bit x, so the jz is always taken.
      const Reg x = static_cast<Reg>(rng.below(8));
      Reg t = random_scratch(rng);
      while (t == x) t = random_scratch(rng);
      const std::string cont = em.fresh_label();
      const std::string junk_label = fmt::format("{}{}", kJunkLabelPrefix, junk_counter++);

      Block pred;
      pred.push_back(make_item(Opcode::kPush, R(t)));
      pred.front().labels = std::move(b.front().labels);
      b.front().labels = {cont};
      pred.push_back(make_item(Opcode::kMov, R(t), R(x)));
      pred.push_back(make_item(Opcode::kAdd, R(t), I(1)));
      pred.push_back(make_item(Opcode::kMul, R(t), R(x)));
      pred.push_back(make_item(Opcode::kAnd, R(t), I(1)));
      pred.push_back(make_item(Opcode::kCmp, R(t), I(0)));
      pred.push_back(make_item(Opcode::kPop, R(t)));
      pred.push_back(make_jump(Opcode::kJz, cont));
      pred.push_back(make_jump(Opcode::kJmp, junk_label));
      out.push_back(std::move(pred));
      out.push_back(std::move(b));

      Block j;
      const int n = static_cast<int>(rng.range(2, 4));
      static constexpr std::array<Opcode, 5> kJunkOps = {Opcode::kAdd, Opcode::kXor,
                                                         Opcode::kSub, Opcode::kOr,
                                                         Opcode::kMul};
      for (int i = 0; i < n; ++i) {
        j.push_back(make_item(kJunkOps[rng.below(kJunkOps.size())], R(random_scratch(rng)),
                              I(static_cast<Word>(rng.next()))));
      }
      j.front().labels = {junk_label};
      j.push_back(make_jump(Opcode::kJmp, cont));
      junk.push_back(std::move(j));
    }
    for (Block& j : junk) out.push_back(std::move(j));
    fn.items = join_blocks(std::move(out));
  }
  return from_editable(em);
}

ModuleImage flatten_control_flow(const ModuleImage& m, std::uint64_t seed) {
  EditModule em = to_editable(m);
  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    EditFunction& fn = em.functions[f];
    if (falls_off_end(fn)) continue;
    std::vector<Block> blocks = split_blocks(fn);
    if (blocks.size() < 2) continue;
    if (std::any_of(blocks.begin(), blocks.end(), condition_live_in)) continue;

    std::map<std::string, std::size_t> block_of;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      for (const std::string& l : blocks[i].front().labels) block_of[l] = i;
    }
    Rng rng(mix_seed(seed, f));
    const Reg s = random_scratch(rng);
    const std::string dispatch = em.fresh_label();
    const std::string trap = em.fresh_label();
    std::vector<std::string> entry_labels(blocks.size());
    for (auto& l : entry_labels) l = em.fresh_label();

    // The state table lives in .rodata; entry k points at block k.
    const Word table = kRodataBase + static_cast<Word>(em.rodata.size());
    for (const std::string& l : entry_labels) em.rodata.push_back(EditData{0, l});

    auto transition = [&](std::size_t target) {
      Block t;
      t.push_back(make_item(Opcode::kPush, R(s)));
      t.push_back(make_item(Opcode::kMov, R(s), I(static_cast<Word>(target))));
      t.push_back(make_jump(Opcode::kJmp, dispatch));
      return t;
    };
    auto append = [](Block& dst, Block src) {
      for (EditItem& item : src) dst.push_back(std::move(item));
    };

    Block head;
    head.push_back(make_item(Opcode::kPush, R(s)));
    head.front().labels = std::move(blocks[0].front().labels);
    blocks[0].front().labels.clear();
    head.push_back(make_item(Opcode::kMov, R(s), I(0)));
    head.push_back(make_item(Opcode::kCmp, R(s), I(static_cast<Word>(blocks.size()))));
    head.back().labels = {dispatch};
    head.push_back(make_jump(Opcode::kJge, trap));
    head.push_back(make_item(Opcode::kAdd, R(s), I(table)));
    head.push_back(make_item(Opcode::kLoad, R(s), Operand::mem(s, 0)));
    head.push_back(make_item(Opcode::kIjmp, R(s)));
    head.push_back(make_item(Opcode::kHalt));
    head.back().labels = {trap};

    std::vector<Block> out{std::move(head)};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      Block body = std::move(blocks[i]);
      // Original labels stay on the block body so jump tables still land
      // past the state restore; the dispatcher enters through the pop.
      Block b;
      b.push_back(make_item(Opcode::kPop, R(s)));
      b.front().labels = {entry_labels[i]};
      EditItem last = body.back();
      const Opcode op = last.inst.op;
      const bool plain_jump = op == Opcode::kJmp && block_of.count(last.ref);
      const bool cond_jump = is_conditional_jump(op) && block_of.count(last.ref);
      if (plain_jump || cond_jump) body.pop_back();
      append(b, std::move(body));
      if (plain_jump) {
        append(b, transition(block_of[last.ref]));
      } else if (cond_jump) {
        const std::string taken = em.fresh_label();
        b.push_back(make_jump(op, taken));
        append(b, transition(i + 1));
        Block t = transition(block_of[last.ref]);
        t.front().labels = {taken};
        append(b, std::move(t));
      } else if (falls_through(b)) {
        append(b, transition(i + 1));
      }
      out.push_back(std::move(b));
    }
    fn.items = join_blocks(std::move(out));
  }
  return from_editable(em);
}

namespace {

bool uses_register(const EditFunction& fn, Reg r) {
  for (const EditItem& item : fn.items) {
    for (const Operand* op : {&item.inst.a, &item.inst.b}) {
      if ((op->kind == Operand::Kind::kReg || (op->kind == Operand::Kind::kMem && op->has_base)) &&
          op->reg == r) {
        return true;
      }
    }
  }
  return false;
}

// Reason the callee cannot be inlined, or empty.
std::string inline_obstacle(const EditFunction& callee, Reg& frame_reg) {
  const auto& items = callee.items;
  if (items.size() < 2 || items[0].inst.op != Opcode::kPush || items[0].inst.a != R(Reg::fp) ||
      items[1].inst.op != Opcode::kMov || items[1].inst.a != R(Reg::fp) ||
      items[1].inst.b != R(Reg::sp)) {
    return "callee lacks the frame-pointer prologue";
  }
  for (const EditItem& item : items) {
    const Opcode op = item.inst.op;
    if (op == Opcode::kCall || op == Opcode::kIcall) return "callee is not a leaf";
    if (op == Opcode::kIjmp || op == Opcode::kHalt) return "callee uses ijmp or halt";
    if (item.inst.b.kind == Operand::Kind::kCode) return "callee takes a code address";
  }
  for (Reg r : kScratch) {
    if (!uses_register(callee, r)) {
      frame_reg = r;
      return {};
    }
  }
  return "callee uses every scratch register";
}

}  // namespace

InlineResult inline_calls(const ModuleImage& m) {
  EditModule em = to_editable(m);
  InlineResult result;
  std::map<std::string, std::size_t> entry_of;
  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    for (const std::string& l : em.functions[f].items.front().labels) entry_of[l] = f;
  }
  const std::vector<EditFunction> original = em.functions;

  for (std::size_t f = 0; f < em.functions.size(); ++f) {
    EditFunction& host = em.functions[f];
    std::vector<EditItem> out;
    for (std::size_t i = 0; i < host.items.size(); ++i) {
      EditItem& site = host.items[i];
      if (site.inst.op != Opcode::kCall) {
        out.push_back(std::move(site));
        continue;
      }
      const std::size_t callee_index = entry_of.at(site.ref);
      const EditFunction& callee = original[callee_index];
      Reg frame_reg = Reg::r0;
      std::string why = callee_index == f ? "recursive call" : inline_obstacle(callee, frame_reg);
      if (why.empty() && i + 1 == host.items.size()) why = "call is the last instruction";
      if (!why.empty()) {
        result.notes.push_back(fmt::format("{} -> {}: {}", host.name.value_or("?"),
                                           callee.name.value_or("?"), why));
        out.push_back(std::move(site));
        continue;
      }

      // Same stack shape as the call: a placeholder return slot, then the
      // callee body with its frame pointer moved to a free scratch register.
      std::array<Reg, kRegCount> perm{};
      for (int r = 0; r < kRegCount; ++r) perm[r] = static_cast<Reg>(r);
      perm[static_cast<int>(Reg::fp)] = frame_reg;
      std::map<std::string, std::string> relabel;
      for (const EditItem& item : callee.items) {
        for (const std::string& l : item.labels) relabel[l] = em.fresh_label();
      }
      std::string after = host.items[i + 1].labels.empty() ? em.fresh_label()
                                                            : host.items[i + 1].labels.front();
      if (host.items[i + 1].labels.empty()) host.items[i + 1].labels.push_back(after);

      EditItem slot = make_item(Opcode::kPush, I(0));
      slot.labels = std::move(site.labels);
      out.push_back(std::move(slot));
      for (const EditItem& src : callee.items) {
        EditItem item = src;
        item.labels.clear();
        for (const std::string& l : src.labels) item.labels.push_back(relabel[l]);
        if (!item.ref.empty()) item.ref = relabel.at(item.ref);
        map_registers(item.inst, perm);
        if (item.inst.op == Opcode::kRet) {
          EditItem pop = make_item(Opcode::kAdd, R(Reg::sp), I(1));
          pop.labels = std::move(item.labels);
          out.push_back(std::move(pop));
          out.push_back(make_jump(Opcode::kJmp, after));
          continue;
        }
        out.push_back(std::move(item));
      }
      if (callee.name && host.name) result.inline_map.try_emplace(*callee.name, *host.name);
    }
    host.items = std::move(out);
  }
  result.module = from_editable(em);
  return result;
}

TransformOutput apply_transforms(const ModuleImage& m, const TransformConfig& config) {
  TransformOutput out;
  out.module = m;
  for (std::size_t k = 0; k < config.passes.size(); ++k) {
    const std::uint64_t seed = mix_seed(config.seed, k);
    switch (config.passes[k]) {
      case Pass::kRename: out.module = rename_registers(out.module, seed); break;
      case Pass::kSubst:
        out.module = substitute_instructions(out.module, seed, config.subst_probability);
        break;
      case Pass::kReorder: out.module = reorder_blocks(out.module, seed); break;
      case Pass::kBcf:
        out.module = bogus_control_flow(out.module, seed, config.bcf_probability);
        break;
      case Pass::kFla: out.module = flatten_control_flow(out.module, seed); break;
      case Pass::kInline: {
        InlineResult r = inline_calls(out.module);
        out.module = std::move(r.module);
        for (auto& [callee, host] : r.inline_map) out.inline_map.try_emplace(callee, host);
        for (auto& n : r.notes) out.notes.push_back(std::move(n));
        break;
      }
    }
  }
  for (const FunctionEntry& f : out.module.functions) {
    if (f.name) out.manifest[*f.name] = *f.name;
  }
  return out;
}

}  // namespace clonematch
