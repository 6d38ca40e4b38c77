// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "clonematch/cli.h"
#include "clonematch/corpus.h"
#include "clonematch/emulator.h"
#include "clonematch/matcher.h"
#include "clonematch/rng.h"
#include "clonematch/similarity.h"
#include "clonematch/tracer.h"
#include "clonematch/transforms.h"

using namespace clonematch;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kCorpusSeed = 1;
constexpr int kCorpusPrograms = 4;
constexpr std::uint64_t kTransformSeed = 7;
constexpr int kDifferentialInputs = 100;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double limit_seconds;  // 0 when untimed
  std::function<Verdict()> check;
};

TraceSet trace_main(const ModuleImage& m, const std::vector<Word>& inputs) {
  return trace_run(m, std::string("main"), inputs);
}

const std::vector<CorpusProgram>& corpus() {
  static const std::vector<CorpusProgram> c =
      generate_corpus({.seed = kCorpusSeed, .programs = kCorpusPrograms});
  return c;
}

std::string run_cli(const std::vector<std::string>& args, int* status = nullptr) {
  std::ostringstream out, err;
  const int s = dispatch(args, out, err);
  if (status != nullptr) *status = s;
  return out.str() + err.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("clonematch_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1. Jaccard of lengths 133 and 228 with LCS 99, directly and through the
// lcs subcommand.
Verdict jaccard_arithmetic() {
  const SimilarityScore s = jaccard(133, 228, 99);
  const std::string shown = fmt::format("{:.3f}", s.score);

  // 99 shared features interleaved with 34 and 129 private ones.
  Signature f, t;
  for (Word i = 0; i < 228; ++i) {
    if (i < 99) {
      f.push_back(Feature::compare(i, i + 1000));
      t.push_back(Feature::compare(i, i + 1000));
    }
    if (i < 34) f.push_back(Feature::read(0x10000 + i));
    if (i < 129) t.insert(t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2),
                          Feature::write(0x20000 + i));
  }
  const std::size_t naive = lcs_length_naive(f, t);
  const fs::path dir = scratch_dir("lcs");
  std::ostringstream fa, ta;
  write_signature(fa, f);
  write_signature(ta, t);
  write_text(dir / "f.sig", fa.str());
  write_text(dir / "t.sig", ta.str());
  int status = 0;
  const std::string out = run_cli({"lcs", (dir / "f.sig").string(), (dir / "t.sig").string()},
                                  &status);
  fs::remove_all(dir);

  const bool ok = std::abs(s.score - 0.377863) <= 1e-6 && shown == "0.378" && f.size() == 133 &&
                  t.size() == 228 && naive == 99 && status == 0 &&
                  out == "lcs=99 jf=0.377863\n";
  return {ok, fmt::format("jaccard={:.6f} shown={} |f|={} |t|={} naive_lcs={} cli='{}'", s.score,
                          shown, f.size(), t.size(), naive,
                          out.substr(0, out.find('\n')))};
}

std::vector<FunctionTrace> traced(const CorpusProgram& p) {
  return trace_main(p.module, p.inputs).functions;
}

// 2. Four of five templates correct.
Verdict accuracy_arithmetic() {
  const CorpusProgram& p = corpus()[0];
  std::vector<FunctionTrace> templates;
  for (const FunctionTrace& t : traced(p)) {
    if (t.function.name != "main" && templates.size() < 5) templates.push_back(t);
  }
  NameMap truth;
  for (const FunctionTrace& t : templates) truth[*t.function.name] = *t.function.name;
  truth[*templates[4].function.name] = *templates[0].function.name;  // deliberately wrong
  const AccuracyReport r = evaluate_accuracy(templates, p.module, truth);
  std::ostringstream out;
  write_accuracy_report(out, r);
  const std::string text = out.str();
  const std::string last = text.substr(text.rfind("ACCURACY"));
  return {r.correct_top1 == 4 && r.templates_total == 5 && last == "ACCURACY 4/5 = 0.800000\n",
          last.substr(0, last.size() - 1)};
}

// 3. Linear-space LCS against the full-table oracle.
Verdict lcs_oracle() {
  std::vector<Signature> all{{}};
  for (std::size_t begin = 0, len = 0; len < 6; ++len) {
    const std::size_t end = all.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (Word k = 0; k < 3; ++k) {
        Signature next = all[i];
        next.push_back(Feature::read(k));
        all.push_back(std::move(next));
      }
    }
    begin = end;
  }
  std::size_t exhaustive = 0, mismatches = 0;
  for (const Signature& a : all) {
    for (const Signature& b : all) {
      ++exhaustive;
      if (lcs_length(a, b) != lcs_length_naive(a, b)) ++mismatches;
    }
  }
  Rng rng(0x5eed);
  auto random_sig = [&] {
    Signature s(rng.below(301));
    for (Feature& f : s) {
      const Word v = static_cast<Word>(rng.below(8));
      f = rng.chance(0.5) ? Feature::read(v) : Feature::compare(v, 3);
    }
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    const Signature a = random_sig();
    const Signature b = random_sig();
    const std::size_t n = lcs_length_naive(a, b);
    if (lcs_length(a, b) != n || lcs_alignment(a, b).size() != n) ++mismatches;
  }
  return {mismatches == 0,
          fmt::format("{} exhaustive pairs + 1000 random pairs, {} mismatches", exhaustive,
                      mismatches)};
}

// 4. Self-emulation identity.
Verdict self_emulation() {
  std::size_t functions = 0, mismatches = 0;
  std::string first_bad;
  for (const CorpusProgram& p : corpus()) {
    for (const FunctionTrace& f : traced(p)) {
      ++functions;
      const EmulationResult r = emulate_function(p.module, f.function, f.info);
      if (!r.outcome.completed() || r.signature != f.signature) {
        ++mismatches;
        if (first_bad.empty()) first_bad = p.name + ":" + f.function.display_name();
      }
    }
  }
  return {mismatches == 0 && functions >= 40 && corpus().size() >= 4,
          fmt::format("{} functions in {} programs, {} mismatches{}", functions, corpus().size(),
                      mismatches, first_bad.empty() ? "" : " first=" + first_bad)};
}

// 5. Self-match ranking.
Verdict self_match() {
  std::size_t total = 0, top1 = 0;
  for (const CorpusProgram& p : corpus()) {
    for (const FunctionTrace& f : traced(p)) {
      ++total;
      const MatchReport r = match_template(f, p.module, {.jobs = 4});
      if (!r.ranked.empty() && r.ranked[0].target.entry == f.function.entry &&
          fmt::format("{:.6f}", r.ranked[0].score.score) == "1.000000") {
        ++top1;
      }
    }
  }
  return {total > 0 && top1 == total, fmt::format("{}/{} templates rank themselves first at 1.000000",
                                                  top1, total)};
}

// Accuracy over the corpus against a transformed copy of each program.
double transformed_accuracy(const std::string& passes, std::size_t* correct, std::size_t* total) {
  *correct = *total = 0;
  TransformConfig config;
  config.passes = parse_pass_list(passes);
  config.seed = kTransformSeed;
  config.bcf_probability = 0.5;
  for (const CorpusProgram& p : corpus()) {
    const TransformOutput t = apply_transforms(p.module, config);
    const AccuracyReport r =
        evaluate_accuracy(traced(p), t.module, t.manifest, &t.inline_map, {.jobs = 4});
    *correct += r.correct_top1;
    *total += r.templates_total;
  }
  return *total == 0 ? 0.0 : static_cast<double>(*correct) / static_cast<double>(*total);
}

double rename_accuracy = -1.0;

// 6. rename+subst+reorder corpus.
Verdict transform_accuracy() {
  std::size_t correct = 0, total = 0;
  rename_accuracy = transformed_accuracy("rename,subst,reorder", &correct, &total);
  return {total >= 40 && rename_accuracy >= 0.90,
          fmt::format("accuracy {}/{} = {:.6f} (need >= 0.90)", correct, total, rename_accuracy)};
}

// 7. bcf + fla corpus.
Verdict obfuscation_accuracy() {
  std::size_t correct = 0, total = 0;
  const double acc = transformed_accuracy("bcf,fla", &correct, &total);
  return {total >= 40 && acc >= 0.75 && rename_accuracy >= 0.0 && acc <= rename_accuracy,
          fmt::format("accuracy {}/{} = {:.6f} (need >= 0.75 and <= {:.6f})", correct, total, acc,
                      rename_accuracy)};
}

// 8. Usage-order globals and per-name library results.
Verdict migration_fidelity() {
  const ModuleImage templ = parse_module(R"(
.data
gvar1: .word 1111
gvar2: .word 2222
out: .word 0
.text
func f:
  load r1, [gvar1]
  test r1, r1
  load r2, [gvar2]
  add r1, r2
  store [out], r1
  ret
endfunc
func main:
  call f
  halt
endfunc
)");
  const ModuleImage target = parse_module(R"(
.data
g1: .word 0
g2: .word 0
res: .word 0
.text
func f2:
  load r4, [g1]
  load r5, [g2]
  test r5, r5
  add r4, r5
  store [res], r4
  ret
endfunc
)");
  const TraceSet run1 = trace_main(templ, {});
  const FunctionTrace* t1 = run1.find("f");
  const EmulationResult e1 = emulate_function(target, target.functions[0], t1->info);
  const bool globals_ok =
      t1->info.global_reads == std::vector<Word>{1111, 2222} && e1.outcome.completed() &&
      e1.migrations == std::vector<Migration>{{kDataBase + 1, 1111}, {kDataBase, 2222}} &&
      e1.signature.size() >= 2 && e1.signature[0] == Feature::read(2222) &&
      e1.signature[1] == Feature::read(1111);

  const ModuleImage lib_templ = parse_module(R"(
.data
out: .word 0
.text
func g:
  push 8
  libcall malloc
  add sp, 1
  mov r1, r0
  push 2
  push 0x2000
  push r1
  libcall memcpy
  add sp, 3
  push 8
  libcall malloc
  add sp, 1
  store [out], r0
  ret
endfunc
func main:
  push 5
  libcall malloc
  add sp, 1
  call g
  halt
endfunc
)");
  const ModuleImage lib_target = parse_module(R"(
.data
out: .word 0, 0
.text
func g2:
  push 8
  libcall malloc
  add sp, 1
  mov r1, r0
  push 4
  push 0x77
  push r1
  libcall memset
  add sp, 3
  push 8
  libcall malloc
  add sp, 1
  store [out], r0
  load r2, [r1+3]
  store [out+1], r2
  ret
endfunc
)");
  const TraceSet run2 = trace_main(lib_templ, {});
  const FunctionTrace* t2 = run2.find("g");
  const std::vector<Word>& mallocs = t2->info.libcall_results.at(LibFunc::kMalloc);
  const EmulationResult e2 = emulate_function(lib_target, lib_target.functions[0], t2->info);
  const Signature expect{Feature::libcall(LibFunc::kMalloc), Feature::libcall(LibFunc::kMemset),
                         Feature::libcall(LibFunc::kMalloc), Feature::write(mallocs.at(1)),
                         Feature::write(0x77)};
  const bool libs_ok =
      mallocs.size() == 2 && mallocs[0] != mallocs[1] && e2.outcome.completed() &&
      e2.system_results == std::vector<std::pair<LibFunc, Word>>{{LibFunc::kMalloc, mallocs[0]},
                                                                 {LibFunc::kMalloc, mallocs[1]}} &&
      e2.signature == expect;
  return {globals_ok && libs_ok,
          fmt::format("g2'<-{:#x} g1'<-{:#x}; malloc0'={:#x} malloc1'={:#x}, memset fill {}",
                      e1.migrations.size() > 0 ? e1.migrations[0].value : 0,
                      e1.migrations.size() > 1 ? e1.migrations[1].value : 0,
                      e2.system_results.size() > 0 ? e2.system_results[0].second : 0,
                      e2.system_results.size() > 1 ? e2.system_results[1].second : 0,
                      e2.signature == expect ? "seen" : "missing")};
}

// 9. Differential behavior preservation.
Verdict behavior_preservation() {
  std::size_t runs = 0, diffs = 0, junk_blocks = 0;
  std::uint64_t junk_hits = 0;
  std::string first_bad;
  const std::vector<std::string> passes{"rename", "subst", "reorder", "bcf", "fla", "inline"};
  for (std::size_t k = 0; k < passes.size(); ++k) {
    TransformConfig config;
    config.passes = parse_pass_list(passes[k]);
    config.seed = mix_seed(kTransformSeed, k);
    for (const CorpusProgram& p : corpus()) {
      const ModuleImage t = apply_transforms(p.module, config).module;
      std::vector<Word> junk;
      for (const auto& [name, addr] : t.code_labels) {
        if (name.starts_with(kJunkLabelPrefix)) junk.push_back(addr);
      }
      junk_blocks += junk.size();
      for (int i = 0; i < kDifferentialInputs; ++i) {
        const std::vector<Word> inputs = random_inputs(mix_seed(p.module.code.size(), i));
        const TraceSet a = trace_main(p.module, inputs);
        const TraceSet b = trace_main(t, inputs);
        ++runs;
        if (a.output != b.output || a.status != b.status || a.exit_value != b.exit_value) {
          ++diffs;
          if (first_bad.empty()) first_bad = passes[k] + ":" + p.name;
        }
        for (Word addr : junk) junk_hits += b.hit_counts.at(addr);
      }
    }
  }
  return {diffs == 0 && junk_hits == 0 && junk_blocks > 0,
          fmt::format("{} differential runs, {} differences{}; {} junk blocks, {} junk hits", runs,
                      diffs, first_bad.empty() ? "" : " first=" + first_bad, junk_blocks,
                      junk_hits)};
}

// 10. Unknown indirect targets and runaway loops.
Verdict abort_semantics() {
  const ModuleImage templ = parse_module(R"(
.data
fp0: .word @one
.text
func one:
  mov r0, 1
  ret
endfunc
func caller:
  load r1, [fp0]
  icall r1
  cmp r0, 1
  ret
endfunc
func main:
  call caller
  halt
endfunc
)");
  // The pointer comes from the target's own .rodata, which is never
  // migrated, so the computed target differs from the recorded one.
  const ModuleImage target = parse_module(R"(
.rodata
slot: .word @two
.text
func pad:
  ret
endfunc
func two:
  mov r0, 2
  ret
endfunc
func caller2:
  load r1, [slot]
  icall r1
  cmp r0, 1
  ret
endfunc
func spin:
  mov r1, 0
top:
  add r1, 1
  cmp r1, 0
  jmp top
endfunc
)");
  const TraceSet run = trace_main(templ, {});
  const FunctionTrace* t = run.find("caller");
  const MatchReport r = match_template(*t, target, {.limits = {20000}});
  const RankedTarget* caller2 = nullptr;
  const RankedTarget* spin = nullptr;
  for (const RankedTarget& x : r.ranked) {
    if (x.target.name == "caller2") caller2 = &x;
    if (x.target.name == "spin") spin = &x;
  }
  const auto spin_idx = target.find_function("spin");
  const EmulationResult loop = emulate_function(target, target.functions[*spin_idx], t->info,
                                                {20000});
  const bool ok = caller2 != nullptr && spin != nullptr && caller2->score.score == 0.0 &&
                  caller2->outcome.kind == EmulationOutcome::Kind::kAbortedUnknownIndirectTarget &&
                  spin->outcome.kind == EmulationOutcome::Kind::kBudgetExhausted &&
                  loop.outcome.kind == EmulationOutcome::Kind::kBudgetExhausted &&
                  loop.steps == 20000 && !loop.signature.empty();
  return {ok, fmt::format("icall target: score {:.6f} outcome {}; loop: outcome {} after {} steps, "
                          "partial signature of {} features",
                          caller2 ? caller2->score.score : -1.0,
                          caller2 ? caller2->outcome.tag() : "?",
                          spin ? spin->outcome.tag() : "?", loop.steps, loop.signature.size())};
}

// 11. `match --jobs 8` equals `--jobs 1` byte for byte.
Verdict parallel_determinism() {
  const fs::path dir = scratch_dir("jobs");
  std::size_t compared = 0, differing = 0;
  std::size_t bytes = 0;
  TransformConfig config;
  config.passes = parse_pass_list("bcf,fla");
  config.seed = kTransformSeed;
  for (const CorpusProgram& p : corpus()) {
    const fs::path mod = dir / (p.name + ".mvm");
    const fs::path obf = dir / (p.name + ".obf.mvm");
    write_text(mod, p.source);
    write_text(obf, print_module(apply_transforms(p.module, config).module));
    std::vector<std::string> trace_args{"trace", mod.string(), "-o", (dir / p.name).string(),
                                        "--input"};
    for (Word w : p.inputs) trace_args.push_back(std::to_string(w));
    int status = 0;
    run_cli(trace_args, &status);
    if (status != 0) return {false, "trace failed for " + p.name};
    // All templates of the program in one file.
    std::string all;
    for (const auto& e : fs::directory_iterator(dir / p.name)) {
      if (e.path().extension() != ".trace") continue;
      std::ifstream in(e.path());
      std::stringstream s;
      s << in.rdbuf();
      all += s.str();
    }
    const fs::path templates = dir / (p.name + ".traces");
    write_text(templates, all);
    for (const fs::path& target : {mod, obf}) {
      const std::string one =
          run_cli({"match", templates.string(), target.string(), "--jobs", "1"});
      const std::string eight =
          run_cli({"match", templates.string(), target.string(), "--jobs", "8"});
      ++compared;
      bytes += one.size();
      if (one != eight) ++differing;
    }
  }
  fs::remove_all(dir);
  return {compared > 0 && differing == 0,
          fmt::format("{} match runs ({} bytes) compared, {} differ", compared, bytes, differing)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "jaccard arithmetic", 1.0, jaccard_arithmetic},
      {2, "accuracy arithmetic", 1.0, accuracy_arithmetic},
      {3, "LCS oracle equivalence", 60.0, lcs_oracle},
      {4, "self-emulation identity", 0.0, self_emulation},
      {5, "self-match ranking", 0.0, self_match},
      {6, "rename+subst+reorder accuracy", 300.0, transform_accuracy},
      {7, "bcf+fla accuracy", 600.0, obfuscation_accuracy},
      {8, "migration fidelity", 0.0, migration_fidelity},
      {9, "behavior preservation", 0.0, behavior_preservation},
      {10, "abort semantics", 0.0, abort_semantics},
      {11, "parallel determinism", 0.0, parallel_determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0.0 || secs < c.limit_seconds;
    const bool pass = v.pass && in_time;
    failures += !pass;
    fmt::print("{} {:>2} {}: {} [{:.2f}s{}]\n", pass ? "PASS" : "FAIL", c.id, c.title, v.detail,
               secs, c.limit_seconds > 0 ? fmt::format(" < {:.0f}s", c.limit_seconds) : "");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
