#pragma once

// Concrete execution of a template module with feature recording.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clonematch/feature.h"
#include "clonematch/machine.h"
#include "clonematch/program.h"

namespace clonematch {

struct IcallEvent {
  Word target = 0;
  Word ret = 0;

  friend bool operator==(const IcallEvent&, const IcallEvent&) = default;
};

// Migration payload recorded for one template function. The event streams
// span the whole dynamic activation of the function (its body plus nested
// user callees) and concatenate across its outermost activations.
struct RuntimeInfo {
  int arg_count = 0;
  // Per outermost activation: argument slot (1-based) -> value at first read.
  std::vector<std::map<int, Word>> activations;
  // Global values in usage order.
  std::vector<Word> global_reads;
  std::vector<IcallEvent> icall_events;
  // FIFO results of system-class library calls, per call.
  std::map<LibFunc, std::vector<Word>> libcall_results;
  std::vector<Word> sub_returns;

  friend bool operator==(const RuntimeInfo&, const RuntimeInfo&) = default;
};

struct FunctionTrace {
  FunctionEntry function;
  Signature signature;
  RuntimeInfo info;

  friend bool operator==(const FunctionTrace&, const FunctionTrace&) = default;
};

struct TraceSet {
  std::vector<FunctionTrace> functions;  // sorted by entry address
  std::vector<Word> output;              // print_int log
  RunState status = RunState::kRunning;
  std::string fault;
  Word exit_value = 0;  // r0 when the run stopped
  std::uint64_t steps = 0;
  std::vector<std::uint64_t> hit_counts;  // per code address

  const FunctionTrace* find(Word entry) const;
  const FunctionTrace* find(std::string_view name) const;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;
};

struct TraceLimits {
  std::uint64_t max_steps = 10'000'000;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `module` from `entry` (function name, or entry address) with `inputs`
// feeding successive read_int calls. Runtime faults and budget exhaustion
// are reported in TraceSet::status with partial results kept. Throws
// TraceError when the entry cannot be resolved.
TraceSet trace_run(const ModuleImage& module, const std::variant<std::string, Word>& entry,
                   const std::vector<Word>& inputs, const TraceLimits& limits = {});

// Seeded streams behind rand() and time() during tracing.
Word rand_stream_value(std::uint64_t index);
Word time_stream_value(std::uint64_t index);

// Trace dump format: a `#clonematch-v1` header, then per function
//   FUNC <addr> <name|?>, ARGC <n>, per activation ACT <k> and ARG <slot> <val>,
//   GLOBAL <val>, ICALL <target> <ret>, LIBRET <name> <ret>, SUBRET <ret>,
//   SIG <len> with its feature lines, END.
void write_function_trace(std::ostream& out, const FunctionTrace& trace);
std::string format_function_trace(const FunctionTrace& trace);

// Reads every FUNC block in the stream. Throws std::runtime_error.
std::vector<FunctionTrace> read_function_traces(std::istream& in);

// `STATUS`, `FAULT`, `EXIT`, `STEPS` and one `OUT <val>` line per output.
void write_run_log(std::ostream& out, const TraceSet& traces);

inline constexpr std::string_view kFormatHeader = "#clonematch-v1";

}  // namespace clonematch
