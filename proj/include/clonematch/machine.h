#pragma once

// The MiniVM semantics kernel shared by the tracer and the emulator.
//
// The kernel executes instructions over tagged cells. What a tag means is up
// to the ExecutionHooks implementation: the tracer uses tags for global-value
// taint, the emulator for not-yet-migrated global values. The kernel only
// distinguishes *copying* a cell (mov, push, pop, load, store, memcpy), which
// carries the tag along, from *consuming* it (any computation), which asks the
// hooks for the concrete value.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clonematch/feature.h"
#include "clonematch/program.h"

namespace clonematch {

inline constexpr std::int32_t kNoTag = -1;

struct Cell {
  Word value = 0;
  std::int32_t tag = kNoTag;

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Sparse word memory. Unwritten cells read as 0.
class Memory {
 public:
  Memory() = default;
  // Loads the module's .data and .rodata images.
  explicit Memory(const ModuleImage& module);

  Cell read(Word addr) const;
  Cell& at(Word addr) { return cells_[addr]; }
  void write(Word addr, const Cell& cell) { cells_[addr] = cell; }

 private:
  std::unordered_map<Word, Cell> cells_;
};

struct Frame {
  std::size_t function = 0;  // index into ModuleImage::functions
  Word return_slot = 0;      // stack address of the return address
  bool via_icall = false;
};

enum class RunState : std::uint8_t {
  kRunning,
  kHalted,
  kReturned,         // the outermost activation returned
  kBudgetExhausted,
  kFaulted,
  kAborted,          // hooks refused an indirect call
};

std::string_view run_state_name(RunState s);

struct IcallDecision {
  enum class Action : std::uint8_t { kDescend, kReturn, kAbort };
  Action action = Action::kDescend;
  Word value = 0;  // r0 for kReturn
};

class ExecutionHooks {
 public:
  virtual ~ExecutionHooks() = default;

  // Concrete value of a cell an instruction computes with.
  virtual Word consume(const Cell& cell) { return cell.value; }
  // A read of .data address `addr` whose memory cell is `slot`; returns the
  // cell delivered to the reader. `slot` may be updated in place.
  virtual Cell load_global(Word /*addr*/, Cell& slot) { return slot; }
  virtual void store_global(Word /*addr*/, const Cell& /*value*/) {}

  virtual void on_read_value(const Cell& /*cell*/) {}
  virtual void on_write_value(const Cell& /*cell*/) {}
  virtual void on_compare(Word /*x*/, Word /*y*/) {}
  virtual void on_libcall(LibFunc /*f*/) {}

  // A load of [fp+1+slot] inside the frame of the innermost activation.
  virtual void on_argument_read(int /*slot*/, const Cell& /*cell*/) {}

  virtual IcallDecision on_icall(Word /*target*/) { return {}; }
  // System-class call: `args` are the raw stack words. Returns r0.
  virtual Word system_libcall(LibFunc f, std::span<const Word> args) = 0;
  virtual void output_libcall(LibFunc /*f*/, std::span<const Word> /*args*/) {}
  virtual void on_libcall_return(LibFunc /*f*/, Word /*r0*/) {}

  virtual void on_enter(const Frame& /*frame*/) {}
  // Called after `frame` has been popped; the kernel's frame stack holds
  // the callers.
  virtual void on_leave(const Frame& /*frame*/, const Cell& /*r0*/) {}
};

class Machine {
 public:
  Machine(const ModuleImage& module, ExecutionHooks& hooks);

  const ModuleImage& module() const { return module_; }

  // Stack setup for a new outermost activation.
  void reset_stack();
  void push(const Cell& cell);
  // Pushes the synthetic return address and enters function `fn`.
  void enter(std::size_t fn);

  // Executes until the state leaves kRunning or `max_steps` total steps have
  // been taken.
  RunState run(std::uint64_t max_steps);

  RunState state() const { return state_; }
  const std::string& fault() const { return fault_; }
  std::uint64_t steps() const { return steps_; }
  Word pc() const { return pc_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const Cell& reg(Reg r) const { return regs_[static_cast<int>(r)]; }
  Cell& reg(Reg r) { return regs_[static_cast<int>(r)]; }
  Memory& memory() { return memory_; }
  const Memory& memory() const { return memory_; }

  // Number of times each code address has executed.
  const std::vector<std::uint64_t>& hit_counts() const { return hits_; }

 private:
  void step();
  void do_fault(std::string reason);
  Cell operand_cell(const Operand& op);
  Word operand_value(const Operand& op);
  Word effective_address(const Operand& mem);
  Cell read_cell(Word addr);
  bool write_cell(Word addr, const Cell& cell);
  void do_libcall(const Instruction& inst);
  void do_pure_libcall(LibFunc f);
  bool condition_holds(Opcode op) const;

  const ModuleImage& module_;
  ExecutionHooks& hooks_;
  Memory memory_;
  Cell regs_[kRegCount];
  std::vector<Frame> frames_;
  Word pc_ = 0;
  Word cond_lhs_ = 0;
  Word cond_rhs_ = 0;
  RunState state_ = RunState::kRunning;
  std::string fault_;
  std::uint64_t steps_ = 0;
  std::vector<std::uint64_t> hits_;
};

}  // namespace clonematch
