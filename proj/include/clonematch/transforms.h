#pragma once

// Semantics-preserving module rewriters that manufacture clone variants.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clonematch/matcher.h"
#include "clonematch/program.h"

namespace clonematch {

enum class Pass : std::uint8_t { kRename, kSubst, kReorder, kBcf, kFla, kInline };

std::string_view pass_name(Pass p);
std::optional<Pass> parse_pass(std::string_view name);
// Comma-separated pass list. Throws std::invalid_argument.
std::vector<Pass> parse_pass_list(std::string_view list);

struct TransformConfig {
  std::vector<Pass> passes;
  std::uint64_t seed = 0;
  double bcf_probability = 0.5;    // per eligible basic block
  double subst_probability = 0.5;  // per matching instruction
};

// Prefix of the labels bogus control flow puts on its never-executed blocks.
inline constexpr std::string_view kJunkLabelPrefix = "bcf.junk";

ModuleImage rename_registers(const ModuleImage& m, std::uint64_t seed);
ModuleImage substitute_instructions(const ModuleImage& m, std::uint64_t seed,
                                    double probability = 0.5);
ModuleImage reorder_blocks(const ModuleImage& m, std::uint64_t seed);
ModuleImage bogus_control_flow(const ModuleImage& m, std::uint64_t seed, double probability);
ModuleImage flatten_control_flow(const ModuleImage& m, std::uint64_t seed);

struct InlineResult {
  ModuleImage module;
  NameMap inline_map;              // callee name -> host name
  std::vector<std::string> notes;  // call sites left untouched, with the reason
};
InlineResult inline_calls(const ModuleImage& m);

struct TransformOutput {
  ModuleImage module;
  NameMap manifest;    // original function name -> transformed function name
  NameMap inline_map;
  std::vector<std::string> notes;
};

// Runs the configured passes in order, each with its own derived seed.
TransformOutput apply_transforms(const ModuleImage& m, const TransformConfig& config);

}  // namespace clonematch
