#pragma once

// Emulation of a target function seeded with a template's runtime
// information.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clonematch/feature.h"
#include "clonematch/program.h"
#include "clonematch/tracer.h"

namespace clonematch {

struct EmulationOutcome {
  enum class Kind : std::uint8_t {
    kCompleted,
    kAbortedUnknownIndirectTarget,
    kBudgetExhausted,
    kFaulted,
  };

  Kind kind = Kind::kCompleted;
  std::string reason;  // kFaulted and kAbortedUnknownIndirectTarget

  bool completed() const { return kind == Kind::kCompleted; }
  // Short tag used in reports: completed, aborted-icall, budget, fault.
  std::string_view tag() const;

  friend bool operator==(const EmulationOutcome&, const EmulationOutcome&) = default;
};

struct EmulationLimits {
  std::uint64_t max_steps = 1'000'000;  // shared by all replayed activations
};

// A .data address whose first load was resolved from migrated values.
struct Migration {
  Word addr = 0;
  Word value = 0;

  friend bool operator==(const Migration&, const Migration&) = default;
};

struct EmulationResult {
  Signature signature;
  EmulationOutcome outcome;
  std::uint64_t steps = 0;
  std::vector<Migration> migrations;                    // in resolution order
  std::vector<std::pair<LibFunc, Word>> system_results;  // r0 per system call
};

// Stack words for one activation, outermost slot first: slot i receives the
// recorded value or kFiller. Empty when the counts differ (the target
// cannot be the template's clone).
struct ArgumentPlan {
  bool skip = false;
  std::vector<Word> slots;  // slots[i - 1] is argument i
};
ArgumentPlan assign_arguments(int target_argc, const RuntimeInfo& info, std::size_t activation);

// Replays every template activation recorded in `info` against `fn`,
// sharing memory, migration queues and the step budget, and concatenates
// the features of fn's body. Argument-count mismatch is the caller's
// concern (see assign_arguments); here the template count is not checked.
EmulationResult emulate_function(const ModuleImage& module, const FunctionEntry& fn,
                                 const RuntimeInfo& info, const EmulationLimits& limits = {});

}  // namespace clonematch
