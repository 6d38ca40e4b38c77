#include "clonematch/machine.h"

#include <fmt/format.h>

namespace clonematch {

namespace {

// Upper bound on the word count handled by one memcpy/memset/strlen.
constexpr Word kMaxBulkWords = 1u << 16;

}  // namespace

std::string_view run_state_name(RunState s) {
  switch (s) {
    case RunState::kRunning: return "running";
    case RunState::kHalted: return "halted";
    case RunState::kReturned: return "returned";
    case RunState::kBudgetExhausted: return "budget";
    case RunState::kFaulted: return "fault";
    case RunState::kAborted: return "aborted";
  }
  return "?";
}

Memory::Memory(const ModuleImage& module) {
  for (std::size_t i = 0; i < module.data.size(); ++i) {
    cells_[kDataBase + static_cast<Word>(i)] = Cell{module.data[i].value};
  }
  for (std::size_t i = 0; i < module.rodata.size(); ++i) {
    cells_[kRodataBase + static_cast<Word>(i)] = Cell{module.rodata[i].value};
  }
}

Cell Memory::read(Word addr) const {
  auto it = cells_.find(addr);
  return it == cells_.end() ? Cell{} : it->second;
}

Machine::Machine(const ModuleImage& module, ExecutionHooks& hooks)
    : module_(module), hooks_(hooks), memory_(module), hits_(module.code.size(), 0) {
  reset_stack();
}

void Machine::reset_stack() {
  for (Cell& c : regs_) c = Cell{};
  reg(Reg::sp) = Cell{kStackTop};
  reg(Reg::fp) = Cell{kStackTop};
  frames_.clear();
  state_ = RunState::kRunning;
  fault_.clear();
  cond_lhs_ = cond_rhs_ = 0;
}

void Machine::push(const Cell& cell) {
  Word sp = reg(Reg::sp).value - 1;
  reg(Reg::sp) = Cell{sp};
  memory_.write(sp, cell);
}

void Machine::enter(std::size_t fn) {
  push(Cell{kSyntheticReturn});
  frames_.push_back(Frame{fn, reg(Reg::sp).value, false});
  pc_ = module_.functions[fn].entry;
  state_ = RunState::kRunning;
  hooks_.on_enter(frames_.back());
}

RunState Machine::run(std::uint64_t max_steps) {
  while (state_ == RunState::kRunning) {
    if (steps_ >= max_steps) {
      state_ = RunState::kBudgetExhausted;
      break;
    }
    step();
  }
  return state_;
}

void Machine::do_fault(std::string reason) {
  state_ = RunState::kFaulted;
  fault_ = fmt::format("{} at {:#x}", reason, pc_);
}

Cell Machine::operand_cell(const Operand& op) {
  switch (op.kind) {
    case Operand::Kind::kReg: return reg(op.reg);
    case Operand::Kind::kImm:
    case Operand::Kind::kCode: return Cell{op.value};
    default: return Cell{};
  }
}

Word Machine::operand_value(const Operand& op) {
  if (op.kind == Operand::Kind::kReg) return hooks_.consume(reg(op.reg));
  return op.value;
}

Word Machine::effective_address(const Operand& mem) {
  if (!mem.has_base) return mem.value;
  return hooks_.consume(reg(mem.reg)) + mem.value;
}

Cell Machine::read_cell(Word addr) {
  if (in_data(addr)) return hooks_.load_global(addr, memory_.at(addr));
  return memory_.read(addr);
}

bool Machine::write_cell(Word addr, const Cell& cell) {
  if (in_rodata(addr)) {
    do_fault(fmt::format("write to .rodata {:#x}", addr));
    return false;
  }
  if (in_data(addr)) hooks_.store_global(addr, cell);
  memory_.write(addr, cell);
  return true;
}

bool Machine::condition_holds(Opcode op) const {
  const auto lhs = static_cast<std::int32_t>(cond_lhs_);
  const auto rhs = static_cast<std::int32_t>(cond_rhs_);
  switch (op) {
    case Opcode::kJz: return cond_lhs_ == cond_rhs_;
    case Opcode::kJnz: return cond_lhs_ != cond_rhs_;
    case Opcode::kJl: return lhs < rhs;
    case Opcode::kJle: return lhs <= rhs;
    case Opcode::kJg: return lhs > rhs;
    case Opcode::kJge: return lhs >= rhs;
    default: return false;
  }
}

void Machine::step() {
  if (pc_ >= module_.code.size()) {
    do_fault("pc out of code");
    return;
  }
  if (!frames_.empty() && !module_.functions[frames_.back().function].contains(pc_)) {
    do_fault("execution left its function");
    return;
  }
  ++steps_;
  ++hits_[pc_];
  const Instruction& inst = module_.code[pc_];
  Word next = pc_ + 1;

  switch (inst.op) {
    case Opcode::kMov:
      reg(inst.a.reg) = operand_cell(inst.b);
      break;

    case Opcode::kLoad: {
      const Word addr = effective_address(inst.b);
      Cell cell = read_cell(addr);
      if (in_data(addr)) hooks_.on_read_value(cell);
      if (inst.b.has_base && inst.b.reg == Reg::fp && inst.b.disp() >= 2 &&
          !frames_.empty() && reg(Reg::fp).value == frames_.back().return_slot - 1) {
        hooks_.on_argument_read(inst.b.disp() - 1, cell);
      }
      reg(inst.a.reg) = cell;
      break;
    }

    case Opcode::kStore: {
      const Word addr = effective_address(inst.a);
      const Cell cell = operand_cell(inst.b);
      if (!write_cell(addr, cell)) return;
      if (in_data(addr)) hooks_.on_write_value(cell);
      break;
    }

    case Opcode::kPush: {
      const Cell cell = operand_cell(inst.a);
      const Word sp = hooks_.consume(reg(Reg::sp)) - 1;
      reg(Reg::sp) = Cell{sp};
      if (!write_cell(sp, cell)) return;
      break;
    }

    case Opcode::kPop: {
      const Word sp = hooks_.consume(reg(Reg::sp));
      const Cell cell = read_cell(sp);
      reg(Reg::sp) = Cell{sp + 1};
      reg(inst.a.reg) = cell;
      break;
    }

    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kDiv:
    case Opcode::kMod:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr: {
      const Word x = hooks_.consume(reg(inst.a.reg));
      const Word y = operand_value(inst.b);
      Word r = 0;
      switch (inst.op) {
        case Opcode::kAdd: r = x + y; break;
        case Opcode::kSub: r = x - y; break;
        case Opcode::kMul: r = x * y; break;
        case Opcode::kDiv:
        case Opcode::kMod:
          if (y == 0) {
            do_fault("division by zero");
            return;
          }
          r = inst.op == Opcode::kDiv ? x / y : x % y;
          break;
        case Opcode::kAnd: r = x & y; break;
        case Opcode::kOr: r = x | y; break;
        case Opcode::kXor: r = x ^ y; break;
        case Opcode::kShl: r = x << (y & 31); break;
        case Opcode::kShr: r = x >> (y & 31); break;
        default: break;
      }
      reg(inst.a.reg) = Cell{r};
      break;
    }

    case Opcode::kNeg:
      reg(inst.a.reg) = Cell{0u - hooks_.consume(reg(inst.a.reg))};
      break;
    case Opcode::kNot:
      reg(inst.a.reg) = Cell{~hooks_.consume(reg(inst.a.reg))};
      break;

    case Opcode::kCmp:
    case Opcode::kTest: {
      const Word x = operand_value(inst.a);
      const Word y = operand_value(inst.b);
      hooks_.on_compare(x, y);
      if (inst.op == Opcode::kCmp) {
        cond_lhs_ = x;
        cond_rhs_ = y;
      } else {
        cond_lhs_ = x & y;
        cond_rhs_ = 0;
      }
      break;
    }

    case Opcode::kJmp:
      next = inst.a.value;
      break;
    case Opcode::kJz:
    case Opcode::kJnz:
    case Opcode::kJl:
    case Opcode::kJle:
    case Opcode::kJg:
    case Opcode::kJge:
      if (condition_holds(inst.op)) next = inst.a.value;
      break;

    case Opcode::kIjmp: {
      const Word target = hooks_.consume(reg(inst.a.reg));
      if (frames_.empty() ||
          !module_.functions[frames_.back().function].contains(target)) {
        do_fault(fmt::format("invalid indirect jump target {:#x}", target));
        return;
      }
      next = target;
      break;
    }

    case Opcode::kCall: {
      push(Cell{next});
      frames_.push_back(Frame{*module_.function_entry_at(inst.a.value),
                              reg(Reg::sp).value, false});
      hooks_.on_enter(frames_.back());
      next = inst.a.value;
      break;
    }

    case Opcode::kIcall: {
      const Word target = hooks_.consume(reg(inst.a.reg));
      const IcallDecision d = hooks_.on_icall(target);
      if (d.action == IcallDecision::Action::kAbort) {
        state_ = RunState::kAborted;
        fault_ = fmt::format("unknown indirect call target {:#x} at {:#x}", target, pc_);
        return;
      }
      if (d.action == IcallDecision::Action::kReturn) {
        reg(Reg::r0) = Cell{d.value};
        break;
      }
      auto fn = module_.function_entry_at(target);
      if (!fn) {
        do_fault(fmt::format("indirect call to non-function {:#x}", target));
        return;
      }
      push(Cell{next});
      frames_.push_back(Frame{*fn, reg(Reg::sp).value, true});
      hooks_.on_enter(frames_.back());
      next = target;
      break;
    }

    case Opcode::kRet: {
      if (frames_.empty()) {
        do_fault("ret without an activation");
        return;
      }
      const Word sp = hooks_.consume(reg(Reg::sp));
      const Word ret = memory_.read(sp).value;
      reg(Reg::sp) = Cell{sp + 1};
      const Frame frame = frames_.back();
      frames_.pop_back();
      // Values returned through an indirect call are opaque to the caller's
      // migration state.
      if (frame.via_icall) reg(Reg::r0).tag = kNoTag;
      hooks_.on_leave(frame, reg(Reg::r0));
      if (frames_.empty()) {
        state_ = RunState::kReturned;
        return;
      }
      if (ret >= module_.code.size()) {
        do_fault(fmt::format("bad return address {:#x}", ret));
        return;
      }
      next = ret;
      break;
    }

    case Opcode::kLibcall:
      do_libcall(inst);
      if (state_ != RunState::kRunning) return;
      break;

    case Opcode::kHalt:
      state_ = RunState::kHalted;
      return;
  }
  pc_ = next;
}

void Machine::do_libcall(const Instruction& inst) {
  auto f = lookup_libcall(inst.a.lib);
  if (!f) {
    do_fault(fmt::format("unknown libcall '{}'", inst.a.lib));
    return;
  }
  hooks_.on_libcall(*f);
  const Word sp = reg(Reg::sp).value;
  switch (libcall_class(*f)) {
    case LibClass::kSystem:
    case LibClass::kOutput: {
      std::vector<Word> args;
      for (int i = 0; i < libcall_arity(*f); ++i) {
        args.push_back(memory_.read(sp + static_cast<Word>(i)).value);
      }
      if (libcall_class(*f) == LibClass::kSystem) {
        reg(Reg::r0) = Cell{hooks_.system_libcall(*f, args)};
      } else {
        hooks_.output_libcall(*f, args);
        reg(Reg::r0) = Cell{0};
      }
      break;
    }
    case LibClass::kPure:
      do_pure_libcall(*f);
      if (state_ != RunState::kRunning) return;
      break;
  }
  hooks_.on_libcall_return(*f, reg(Reg::r0).value);
}

void Machine::do_pure_libcall(LibFunc f) {
  const Word sp = hooks_.consume(reg(Reg::sp));
  Word args[3] = {0, 0, 0};
  for (int i = 0; i < libcall_arity(f); ++i) {
    args[i] = hooks_.consume(memory_.read(sp + static_cast<Word>(i)));
  }
  auto signed_of = [](Word w) { return static_cast<std::int32_t>(w); };
  Word result = 0;
  switch (f) {
    case LibFunc::kMemcpy:
    case LibFunc::kMemset: {
      const Word dst = args[0];
      const Word n = args[2];
      if (n > kMaxBulkWords) {
        do_fault(fmt::format("{} length {:#x} too large", libcall_name(f), n));
        return;
      }
      for (Word i = 0; i < n; ++i) {
        Cell c = f == LibFunc::kMemcpy ? read_cell(args[1] + i) : Cell{args[1]};
        if (!write_cell(dst + i, c)) return;
      }
      result = dst;
      break;
    }
    case LibFunc::kStrlen: {
      Word n = 0;
      while (hooks_.consume(read_cell(args[0] + n)) != 0) {
        if (++n > kMaxBulkWords) {
          do_fault("strlen ran past its limit");
          return;
        }
      }
      result = n;
      break;
    }
    case LibFunc::kAbs: {
      const std::int32_t v = signed_of(args[0]);
      result = v < 0 ? 0u - args[0] : args[0];
      break;
    }
    case LibFunc::kMin:
      result = signed_of(args[0]) <= signed_of(args[1]) ? args[0] : args[1];
      break;
    case LibFunc::kMax:
      result = signed_of(args[0]) >= signed_of(args[1]) ? args[0] : args[1];
      break;
    default:
      break;
  }
  reg(Reg::r0) = Cell{result};
}

}  // namespace clonematch
