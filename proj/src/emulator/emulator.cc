#include "clonematch/emulator.h"

#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "clonematch/machine.h"

namespace clonematch {

std::string_view EmulationOutcome::tag() const {
  switch (kind) {
    case Kind::kCompleted: return "completed";
    case Kind::kAbortedUnknownIndirectTarget: return "aborted-icall";
    case Kind::kBudgetExhausted: return "budget";
    case Kind::kFaulted: return "fault";
  }
  return "?";
}

ArgumentPlan assign_arguments(int target_argc, const RuntimeInfo& info, std::size_t activation) {
  ArgumentPlan plan;
  if (target_argc != info.arg_count) {
    plan.skip = true;
    return plan;
  }
  const std::map<int, Word>* recorded =
      activation < info.activations.size() ? &info.activations[activation] : nullptr;
  for (int slot = 1; slot <= target_argc; ++slot) {
    Word v = kFiller;
    if (recorded != nullptr) {
      if (auto it = recorded->find(slot); it != recorded->end()) v = it->second;
    }
    plan.slots.push_back(v);
  }
  return plan;
}

namespace {

// A .data value loaded before this activation accessed its address. Its
// payload is decided when first consumed, from the template's usage-ordered
// global values.
struct PendingGlobal {
  Word addr = 0;
  std::optional<Word> resolved;
  std::vector<std::size_t> features;  // signature entries to backfill
};

class EmulationHooks final : public ExecutionHooks {
 public:
  EmulationHooks(std::size_t fn, const RuntimeInfo& info, EmulationResult& out)
      : fn_(fn), info_(info), out_(out), icall_used_(info.icall_events.size(), false) {}

  Word consume(const Cell& cell) override {
    if (cell.tag == kNoTag) return cell.value;
    return resolve(static_cast<std::size_t>(cell.tag));
  }

  Cell load_global(Word addr, Cell& slot) override {
    if (accessed_.insert(addr).second) {
      pending_.push_back(PendingGlobal{addr, std::nullopt, {}});
      const auto tag = static_cast<std::int32_t>(pending_.size() - 1);
      activation_pending_.push_back(pending_.size() - 1);
      slot = Cell{slot.value, tag};
    }
    return slot;
  }

  void store_global(Word addr, const Cell& /*value*/) override { accessed_.insert(addr); }

  void on_read_value(const Cell& cell) override { emit_value(Feature::Kind::kRead, cell); }
  void on_write_value(const Cell& cell) override { emit_value(Feature::Kind::kWrite, cell); }
  void on_compare(Word x, Word y) override { emit(Feature::compare(x, y)); }
  void on_libcall(LibFunc f) override { emit(Feature::libcall(f)); }

  IcallDecision on_icall(Word target) override {
    for (std::size_t i = 0; i < info_.icall_events.size(); ++i) {
      if (!icall_used_[i] && info_.icall_events[i].target == target) {
        icall_used_[i] = true;
        return {IcallDecision::Action::kReturn, info_.icall_events[i].ret};
      }
    }
    return {IcallDecision::Action::kAbort, 0};
  }

  Word system_libcall(LibFunc f, std::span<const Word> /*args*/) override {
    Word v = kFiller;
    if (auto it = info_.libcall_results.find(f); it != info_.libcall_results.end()) {
      std::size_t& cursor = lib_cursor_[f];
      if (cursor < it->second.size()) v = it->second[cursor++];
    }
    out_.system_results.emplace_back(f, v);
    return v;
  }

  void on_enter(const Frame& frame) override { stack_.push_back(frame.function); }
  void on_leave(const Frame& /*frame*/, const Cell& /*r0*/) override { stack_.pop_back(); }

  // Pending values never consumed resolve in load order, mirroring the
  // tracer, which appends unconsumed loads when an activation closes.
  void end_activation() {
    for (std::size_t p : activation_pending_) resolve(p);
    activation_pending_.clear();
    accessed_.clear();
    stack_.clear();
  }

 private:
  Word resolve(std::size_t p) {
    PendingGlobal& pg = pending_[p];
    if (!pg.resolved) {
      const Word v = global_cursor_ < info_.global_reads.size()
                         ? info_.global_reads[global_cursor_++]
                         : kFiller;
      pg.resolved = v;
      for (std::size_t idx : pg.features) out_.signature[idx].first = v;
      out_.migrations.push_back({pg.addr, v});
    }
    return *pg.resolved;
  }

  bool in_body() const { return !stack_.empty() && stack_.back() == fn_; }

  void emit(const Feature& f) {
    if (in_body()) out_.signature.push_back(f);
  }

  void emit_value(Feature::Kind kind, const Cell& cell) {
    if (!in_body()) return;
    Word v = cell.value;
    if (cell.tag != kNoTag) {
      PendingGlobal& pg = pending_[static_cast<std::size_t>(cell.tag)];
      if (pg.resolved) {
        v = *pg.resolved;
      } else {
        pg.features.push_back(out_.signature.size());
      }
    }
    out_.signature.push_back(Feature{kind, v, 0});
  }

  std::size_t fn_;
  const RuntimeInfo& info_;
  EmulationResult& out_;
  std::vector<bool> icall_used_;
  std::map<LibFunc, std::size_t> lib_cursor_;
  std::size_t global_cursor_ = 0;
  std::vector<PendingGlobal> pending_;
  std::vector<std::size_t> activation_pending_;
  std::unordered_set<Word> accessed_;
  std::vector<std::size_t> stack_;
};

}  // namespace

EmulationResult emulate_function(const ModuleImage& module, const FunctionEntry& fn,
                                 const RuntimeInfo& info, const EmulationLimits& limits) {
  const auto index = module.function_entry_at(fn.entry);
  if (!index) {
    throw std::invalid_argument(fmt::format("no function starts at {:#x}", fn.entry));
  }
  const int argc = detect_arg_count(module, module.functions[*index]);

  EmulationResult result;
  EmulationHooks hooks(*index, info, result);
  Machine machine(module, hooks);
  const std::size_t activations = std::max<std::size_t>(1, info.activations.size());

  for (std::size_t k = 0; k < activations; ++k) {
    machine.reset_stack();
    RuntimeInfo shape;
    shape.arg_count = argc;
    if (k < info.activations.size()) shape.activations.push_back(info.activations[k]);
    const ArgumentPlan plan = assign_arguments(argc, shape, 0);
    for (auto it = plan.slots.rbegin(); it != plan.slots.rend(); ++it) machine.push(Cell{*it});
    machine.enter(*index);
    const RunState state = machine.run(limits.max_steps);
    hooks.end_activation();

    if (state == RunState::kReturned) continue;
    if (state == RunState::kHalted) break;
    if (state == RunState::kBudgetExhausted) {
      result.outcome = {EmulationOutcome::Kind::kBudgetExhausted, {}};
    } else if (state == RunState::kAborted) {
      result.outcome = {EmulationOutcome::Kind::kAbortedUnknownIndirectTarget, machine.fault()};
    } else {
      result.outcome = {EmulationOutcome::Kind::kFaulted, machine.fault()};
    }
    break;
  }
  result.steps = machine.steps();
  return result;
}

}  // namespace clonematch
