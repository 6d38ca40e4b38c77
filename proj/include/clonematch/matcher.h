#pragma once

// Template-versus-target ranking and Top-1 accuracy.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clonematch/emulator.h"
#include "clonematch/similarity.h"
#include "clonematch/tracer.h"

namespace clonematch {

struct MatchOptions {
  EmulationLimits limits;
  unsigned jobs = 1;
  // Lists argument-count mismatches at the bottom with score 0.
  bool include_skipped = false;
};

struct RankedTarget {
  FunctionEntry target;
  SimilarityScore score;
  EmulationOutcome outcome;
  bool skipped = false;  // argument-count mismatch, never emulated
};

struct MatchReport {
  FunctionEntry template_function;
  std::size_t template_sig_len = 0;
  std::vector<RankedTarget> ranked;
  std::size_t skipped_count = 0;
};

MatchReport match_template(const FunctionTrace& templ, const ModuleImage& target,
                           const MatchOptions& options = {});

// `TEMPLATE ...` header and one `RANK ...` line per entry, at most `top`
// entries when given.
void write_match_report(std::ostream& out, const MatchReport& report,
                        std::optional<std::size_t> top = std::nullopt);

struct TemplateVerdict {
  std::string template_name;
  std::string expected;  // ground-truth target name
  std::string top1;      // "?" when nothing ranked
  double top1_score = 0.0;
  bool correct = false;
};

struct AccuracyReport {
  std::size_t templates_total = 0;
  std::size_t correct_top1 = 0;
  double accuracy = 0.0;
  std::vector<TemplateVerdict> verdicts;
  std::vector<std::string> missing_truth;  // templates excluded for lack of truth
};

using NameMap = std::map<std::string, std::string>;

// A template is correct when its Top-1 target carries the ground-truth name,
// or when inline_map names the Top-1 target as the host the expected target
// was inlined into. A Top-1 with score 0 is never correct.
AccuracyReport evaluate_accuracy(const std::vector<FunctionTrace>& templates,
                                 const ModuleImage& target, const NameMap& truth,
                                 const NameMap* inline_map = nullptr,
                                 const MatchOptions& options = {});

// Verdict lines, excluded templates, and the final `ACCURACY k/n = x` line.
void write_accuracy_report(std::ostream& out, const AccuracyReport& report);

// Whitespace-separated `<left> <right>` lines; `#` starts a comment. Throws
// std::runtime_error on malformed lines.
NameMap read_name_map(std::istream& in);

}  // namespace clonematch
