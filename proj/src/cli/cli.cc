#include "clonematch/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "clonematch/corpus.h"
#include "clonematch/matcher.h"
#include "clonematch/similarity.h"
#include "clonematch/tracer.h"
#include "clonematch/transforms.h"

namespace clonematch {

namespace fs = std::filesystem;

namespace {

// Domain failure: reported on the error stream with exit status 1.
class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CliError(fmt::format("cannot write '{}'", path.string()));
}

ModuleImage load_module(const std::string& path) {
  try {
    return parse_module(read_file(path));
  } catch (const ParseError& e) {
    throw CliError(fmt::format("{}:{}", path, e.what()));
  }
}

std::vector<FunctionTrace> load_traces(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return read_function_traces(in);
  } catch (const std::runtime_error& e) {
    throw CliError(fmt::format("{}: {}", path, e.what()));
  }
}

NameMap load_name_map(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return read_name_map(in);
  } catch (const std::runtime_error& e) {
    throw CliError(fmt::format("{}: {}", path, e.what()));
  }
}

Word parse_input_word(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = 0;
    if (s.starts_with("0x") || s.starts_with("0X")) {
      v = static_cast<long long>(std::stoull(s, &used, 16));
    } else {
      v = std::stoll(s, &used, 10);
    }
    if (used == s.size() && v >= INT32_MIN && v <= static_cast<long long>(UINT32_MAX)) {
      return static_cast<Word>(v);
    }
  } catch (const std::exception&) {
  }
  throw CliError(fmt::format("bad input value '{}'", s));
}

std::string trace_file_name(const FunctionEntry& f) {
  return f.name ? fmt::format("f_{}.trace", *f.name) : fmt::format("f_{:08x}.trace", f.entry);
}

struct Options {
  std::string module;
  std::string target;
  std::string trace;
  std::string trace_dir;
  std::string entry = "main";
  std::vector<std::string> inputs;
  std::string output;
  std::uint64_t max_steps = 0;
  std::size_t top = 0;
  unsigned jobs = 1;
  bool include_skipped = false;
  bool strip_target = false;
  std::string function;
  std::string truth;
  std::string inline_map;
  std::string passes;
  std::uint64_t seed = 0;
  double bcf_prob = 0.5;
  double subst_prob = 0.5;
  std::string sig_a;
  std::string sig_b;
  int programs = 4;
};

MatchOptions match_options(const Options& o) {
  MatchOptions m;
  m.jobs = o.jobs;
  m.include_skipped = o.include_skipped;
  if (o.max_steps > 0) m.limits.max_steps = o.max_steps;
  return m;
}

int run_trace(const Options& o, std::ostream& out) {
  const ModuleImage module = load_module(o.module);
  std::vector<Word> inputs;
  for (const std::string& s : o.inputs) inputs.push_back(parse_input_word(s));
  std::variant<std::string, Word> entry = o.entry;
  if (o.entry.starts_with("0x")) entry = parse_input_word(o.entry);
  TraceLimits limits;
  if (o.max_steps > 0) limits.max_steps = o.max_steps;

  TraceSet ts;
  try {
    ts = trace_run(module, entry, inputs, limits);
  } catch (const TraceError& e) {
    throw CliError(e.what());
  }
  const fs::path dir(o.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  std::ostringstream log;
  write_run_log(log, ts);
  write_file(dir / "run.log", log.str());
  for (const FunctionTrace& f : ts.functions) {
    write_file(dir / trace_file_name(f.function), format_function_trace(f));
  }
  out << fmt::format("traced {} function(s), status {}, {} step(s)\n", ts.functions.size(),
                     run_state_name(ts.status), ts.steps);
  return 0;
}

int run_match(const Options& o, std::ostream& out) {
  std::vector<FunctionTrace> traces = load_traces(o.trace);
  if (!o.function.empty()) {
    std::erase_if(traces, [&](const FunctionTrace& t) {
      return t.function.display_name() != o.function;
    });
    if (traces.empty()) throw CliError(fmt::format("no trace for function '{}'", o.function));
  }
  ModuleImage target = load_module(o.target);
  if (o.strip_target) target = strip(target);
  const MatchOptions opts = match_options(o);
  const std::optional<std::size_t> top = o.top > 0 ? std::optional(o.top) : std::nullopt;
  out << kFormatHeader << '\n';
  for (const FunctionTrace& t : traces) {
    write_match_report(out, match_template(t, target, opts), top);
  }
  return 0;
}

int run_eval(const Options& o, std::ostream& out) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(o.trace_dir, ec)) {
    if (e.path().extension() == ".trace") files.push_back(e.path());
  }
  if (ec) throw CliError(fmt::format("cannot list '{}': {}", o.trace_dir, ec.message()));
  std::sort(files.begin(), files.end());
  std::vector<FunctionTrace> templates;
  for (const fs::path& p : files) {
    for (FunctionTrace& t : load_traces(p.string())) templates.push_back(std::move(t));
  }
  const ModuleImage target = load_module(o.target);
  const NameMap truth = load_name_map(o.truth);
  NameMap inlined;
  if (!o.inline_map.empty()) inlined = load_name_map(o.inline_map);
  const AccuracyReport report = evaluate_accuracy(
      templates, target, truth, o.inline_map.empty() ? nullptr : &inlined, match_options(o));
  out << kFormatHeader << '\n';
  write_accuracy_report(out, report);
  return 0;
}

void write_name_map(const fs::path& path, const NameMap& map) {
  std::string text;
  for (const auto& [k, v] : map) text += fmt::format("{} {}\n", k, v);
  write_file(path, text);
}

int run_transform(const Options& o, std::ostream& out) {
  const ModuleImage module = load_module(o.module);
  TransformConfig config;
  try {
    config.passes = parse_pass_list(o.passes);
  } catch (const std::invalid_argument& e) {
    throw CliError(e.what());
  }
  config.seed = o.seed;
  config.bcf_probability = o.bcf_prob;
  config.subst_probability = o.subst_prob;
  const TransformOutput t = apply_transforms(module, config);
  write_file(o.output, print_module(t.module));
  write_name_map(o.output + ".map", t.manifest);
  if (std::find(config.passes.begin(), config.passes.end(), Pass::kInline) !=
      config.passes.end()) {
    write_name_map(o.output + ".inline", t.inline_map);
  }
  for (const std::string& note : t.notes) out << "note: " << note << '\n';
  out << fmt::format("wrote {} ({} function(s), {} instruction(s))\n", o.output,
                     t.module.functions.size(), t.module.code.size());
  return 0;
}

int run_lcs(const Options& o, std::ostream& out) {
  auto load_sig = [](const std::string& path) {
    std::istringstream in(read_file(path));
    try {
      return read_signature(in);
    } catch (const std::runtime_error& e) {
      throw CliError(fmt::format("{}: {}", path, e.what()));
    }
  };
  const Signature a = load_sig(o.sig_a);
  const Signature b = load_sig(o.sig_b);
  const SimilarityScore s = similarity(a, b);
  out << fmt::format("lcs={} jf={:.6f}\n", s.lcs_len, s.score);
  return 0;
}

int run_strip(const Options& o, std::ostream& out) {
  const ModuleImage module = strip(load_module(o.module));
  write_file(o.output, print_module(module));
  out << fmt::format("wrote {}\n", o.output);
  return 0;
}

int run_gen_corpus(const Options& o, std::ostream& out) {
  CorpusOptions co;
  co.seed = o.seed;
  co.programs = o.programs;
  const fs::path dir(o.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  for (const CorpusProgram& p : generate_corpus(co)) {
    write_file(dir / (p.name + ".mvm"), p.source);
    std::string inputs;
    for (Word w : p.inputs) inputs += fmt::format("{}\n", w);
    write_file(dir / (p.name + ".inputs"), inputs);
    out << p.name << '\n';
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MiniVM binary function clone detector", "clonematch"};
  app.require_subcommand(1);
  Options o;

  auto* trace = app.add_subcommand("trace", "Run a module and dump per-function traces");
  trace->add_option("module", o.module, "Module source")->required();
  trace->add_option("--entry", o.entry, "Entry function name or 0x address");
  trace->add_option("--input", o.inputs, "Values for successive read_int calls");
  trace->add_option("-o,--output", o.output, "Output directory")->required();
  trace->add_option("--max-steps", o.max_steps, "Step budget")->check(CLI::PositiveNumber);

  auto* match = app.add_subcommand("match", "Rank the functions of a target module");
  match->add_option("trace", o.trace, "Trace file with one or more FUNC blocks")->required();
  match->add_option("target", o.target, "Target module source")->required();
  match->add_option("--top", o.top, "Print at most N ranks")->check(CLI::PositiveNumber);
  match->add_option("--jobs", o.jobs, "Parallel emulations")->check(CLI::PositiveNumber);
  match->add_option("--max-steps", o.max_steps, "Emulation step budget per target")
      ->check(CLI::PositiveNumber);
  match->add_option("--function", o.function, "Only this template function");
  match->add_flag("--include-skipped", o.include_skipped,
                  "List argument-count mismatches at the bottom");
  match->add_flag("--strip", o.strip_target, "Strip the target before matching");

  auto* eval = app.add_subcommand("eval", "Top-1 accuracy over a trace directory");
  eval->add_option("traces", o.trace_dir, "Directory of .trace files")->required();
  eval->add_option("target", o.target, "Unstripped target module")->required();
  eval->add_option("--truth", o.truth, "Template-to-target name map")->required();
  eval->add_option("--inline-map", o.inline_map, "Callee-to-host name map");
  eval->add_option("--jobs", o.jobs, "Parallel emulations")->check(CLI::PositiveNumber);
  eval->add_option("--max-steps", o.max_steps, "Emulation step budget per target")
      ->check(CLI::PositiveNumber);

  auto* transform = app.add_subcommand("transform", "Write a semantics-preserving variant");
  transform->add_option("module", o.module, "Module source")->required();
  transform->add_option("--passes", o.passes, "Comma-separated: rename,subst,reorder,bcf,fla,inline")
      ->required();
  transform->add_option("--seed", o.seed, "Random seed");
  transform->add_option("--bcf-prob", o.bcf_prob, "Opaque predicate probability per block")
      ->check(CLI::Range(0.0, 1.0));
  transform->add_option("--subst-prob", o.subst_prob, "Substitution probability per site")
      ->check(CLI::Range(0.0, 1.0));
  transform->add_option("-o,--output", o.output, "Output module")->required();

  auto* lcs = app.add_subcommand("lcs", "LCS and Jaccard score of two SIG files");
  lcs->add_option("a", o.sig_a, "First signature")->required();
  lcs->add_option("b", o.sig_b, "Second signature")->required();

  auto* strip_cmd = app.add_subcommand("strip", "Remove function and label names");
  strip_cmd->add_option("module", o.module, "Module source")->required();
  strip_cmd->add_option("-o,--output", o.output, "Output module")->required();

  auto* gen = app.add_subcommand("gen-corpus", "Write the seeded test corpus");
  gen->add_option("--seed", o.seed, "Random seed");
  gen->add_option("--programs", o.programs, "Program count")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", o.output, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (trace->parsed()) return run_trace(o, out);
    if (match->parsed()) return run_match(o, out);
    if (eval->parsed()) return run_eval(o, out);
    if (transform->parsed()) return run_transform(o, out);
    if (lcs->parsed()) return run_lcs(o, out);
    if (strip_cmd->parsed()) return run_strip(o, out);
    if (gen->parsed()) return run_gen_corpus(o, out);
  } catch (const CliError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace clonematch
