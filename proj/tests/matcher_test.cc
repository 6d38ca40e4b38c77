#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "clonematch/matcher.h"
#include "support.h"

using namespace clonematch;

namespace {

std::vector<FunctionTrace> corpus_templates(std::size_t program) {
  const CorpusProgram& p = testing::default_corpus()[program];
  std::vector<FunctionTrace> out;
  for (const FunctionTrace& f : testing::trace_main(p.module, p.inputs).functions) {
    if (f.function.name != "main") out.push_back(f);
  }
  return out;
}

NameMap identity_truth(const std::vector<FunctionTrace>& templates) {
  NameMap truth;
  for (const FunctionTrace& t : templates) truth[*t.function.name] = *t.function.name;
  return truth;
}

}  // namespace

TEST_CASE("a template ranks itself first in its own module") {
  const CorpusProgram& p = testing::default_corpus()[0];
  for (const FunctionTrace& t : corpus_templates(0)) {
    const MatchReport r = match_template(t, p.module);
    REQUIRE_FALSE(r.ranked.empty());
    CHECK(r.ranked[0].target.entry == t.function.entry);
    CHECK(r.ranked[0].score.score == 1.0);
    CHECK(r.template_sig_len == t.signature.size());
  }
}

TEST_CASE("ranking is by score, then address, and filtered by argument count") {
  const CorpusProgram& p = testing::default_corpus()[1];
  for (const FunctionTrace& t : corpus_templates(1)) {
    const MatchReport r = match_template(t, p.module);
    std::size_t same_argc = 0;
    for (const FunctionEntry& f : p.module.functions) {
      if (detect_arg_count(p.module, f) == t.info.arg_count) ++same_argc;
    }
    CHECK(r.ranked.size() == same_argc);
    CHECK(r.skipped_count == p.module.functions.size() - same_argc);
    for (std::size_t k = 0; k < r.ranked.size(); ++k) {
      CHECK(detect_arg_count(p.module, r.ranked[k].target) == t.info.arg_count);
      if (k == 0) continue;
      const RankedTarget& a = r.ranked[k - 1];
      const RankedTarget& b = r.ranked[k];
      const bool ordered = a.score.score > b.score.score ||
                           (a.score.score == b.score.score && a.target.entry < b.target.entry);
      CHECK(ordered);
    }
  }
}

TEST_CASE("no function with the template's argument count gives an empty ranking") {
  const ModuleImage target = parse_module(
      ".text\nfunc a:\n  ret\nendfunc\nfunc b:\n  mov r0, 2\n  ret\nendfunc\n");
  FunctionTrace t;
  t.function = {std::string("x"), 0, 1};
  t.info.arg_count = 4;
  const MatchReport r = match_template(t, target);
  CHECK(r.ranked.empty());
  CHECK(r.skipped_count == 2);

  const MatchReport with_skipped = match_template(t, target, {.include_skipped = true});
  REQUIRE(with_skipped.ranked.size() == 2);
  CHECK(with_skipped.ranked[0].skipped);
  CHECK(with_skipped.ranked[0].score.score == 0.0);
}

TEST_CASE("an aborted target scores zero") {
  const ModuleImage target = parse_module(R"(
.data
g: .word 0
slot: .word @other
.text
func other:
  ret
endfunc
func f:
  load r1, [g]
  cmp r1, 3
  load r2, [slot]
  icall r2
  ret
endfunc
)");
  FunctionTrace t;
  t.function = {std::string("tmpl"), 0, 1};
  t.signature = {Feature::read(3), Feature::compare(3, 3)};
  t.info.global_reads = {3};
  const MatchReport r = match_template(t, target);
  const auto it = std::find_if(r.ranked.begin(), r.ranked.end(), [](const RankedTarget& x) {
    return x.target.name == "f";
  });
  REQUIRE(it != r.ranked.end());
  CHECK(it->outcome.kind == EmulationOutcome::Kind::kAbortedUnknownIndirectTarget);
  CHECK(it->score.score == 0.0);
}

TEST_CASE("parallel ranking equals sequential ranking") {
  const CorpusProgram& p = testing::default_corpus()[3];
  for (const FunctionTrace& t : corpus_templates(3)) {
    std::ostringstream seq, par;
    write_match_report(seq, match_template(t, p.module, {.jobs = 1}));
    write_match_report(par, match_template(t, p.module, {.jobs = 8}));
    CHECK(seq.str() == par.str());
  }
}

TEST_CASE("four correct of five is 0.8") {
  std::vector<FunctionTrace> templates = corpus_templates(0);
  templates.resize(5);
  NameMap truth = identity_truth(templates);
  truth[*templates[2].function.name] = "no_such_function";
  const AccuracyReport r = evaluate_accuracy(templates, testing::default_corpus()[0].module, truth);
  CHECK(r.templates_total == 5);
  CHECK(r.correct_top1 == 4);
  CHECK(r.accuracy == 0.8);
  std::ostringstream out;
  write_accuracy_report(out, r);
  CHECK(out.str().find("ACCURACY 4/5 = 0.800000\n") != std::string::npos);
  CHECK(out.str().find("VERDICT " + *templates[2].function.name + " miss") != std::string::npos);
}

TEST_CASE("identity corpus has accuracy one") {
  for (std::size_t i = 0; i < testing::default_corpus().size(); ++i) {
    const std::vector<FunctionTrace> templates = corpus_templates(i);
    const AccuracyReport r =
        evaluate_accuracy(templates, testing::default_corpus()[i].module, identity_truth(templates));
    CHECK(r.accuracy == 1.0);
    CHECK(r.templates_total == templates.size());
  }
}

TEST_CASE("templates without truth are excluded and reported") {
  std::vector<FunctionTrace> templates = corpus_templates(0);
  templates.resize(3);
  NameMap truth = identity_truth(templates);
  truth.erase(*templates[0].function.name);
  const AccuracyReport r = evaluate_accuracy(templates, testing::default_corpus()[0].module, truth);
  CHECK(r.templates_total == 2);
  CHECK(r.missing_truth == std::vector<std::string>{*templates[0].function.name});
}

TEST_CASE("an inlined callee counts when its host ranks first") {
  const ModuleImage original = parse_module(R"(
.data
g: .word 21
.text
func leaf:
  push fp
  mov fp, sp
  load r1, [g]
  cmp r1, 9
  mul r1, 2
  mov r0, r1
  pop fp
  ret
endfunc
func main:
  call leaf
  halt
endfunc
)");
  // The target carries leaf's body only inside a differently named host.
  const ModuleImage target = parse_module(R"(
.data
g: .word 0
.text
func host:
  push fp
  mov fp, sp
  load r1, [g]
  cmp r1, 9
  mul r1, 2
  mov r0, r1
  pop fp
  ret
endfunc
)");
  const std::vector<FunctionTrace> templates{*testing::trace_main(original).find("leaf")};
  const NameMap truth{{"leaf", "leaf"}};
  const NameMap inline_map{{"leaf", "host"}};
  CHECK(evaluate_accuracy(templates, target, truth).correct_top1 == 0);
  CHECK(evaluate_accuracy(templates, target, truth, &inline_map).correct_top1 == 1);
}

TEST_CASE("a zero-score Top-1 is never correct") {
  const ModuleImage target = parse_module(".text\nfunc f:\n  ret\nendfunc\n");
  FunctionTrace t;
  t.function = {std::string("f"), 0, 1};
  t.signature = {Feature::read(1)};
  const AccuracyReport r = evaluate_accuracy({t}, target, {{"f", "f"}});
  CHECK(r.verdicts.at(0).top1 == "f");
  CHECK_FALSE(r.verdicts.at(0).correct);
}

TEST_CASE("report lines follow the fixed format") {
  const CorpusProgram& p = testing::default_corpus()[0];
  const FunctionTrace t = corpus_templates(0)[0];
  std::ostringstream out;
  write_match_report(out, match_template(t, p.module), 2);
  std::istringstream lines(out.str());
  std::string header, first, second, extra;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(header == "TEMPLATE " + hex_word(t.function.entry) + " " + *t.function.name +
                      " sig_len=" + std::to_string(t.signature.size()));
  CHECK(first == "RANK 1 SCORE 1.000000 ADDR " + hex_word(t.function.entry) + " NAME " +
                     *t.function.name + " OUTCOME completed");
  CHECK(second.rfind("RANK 2 SCORE ", 0) == 0);
}

TEST_CASE("name maps parse and reject malformed lines") {
  std::istringstream ok("# truth\na b\n\n  c   d  # trailing\n");
  CHECK(read_name_map(ok) == NameMap{{"a", "b"}, {"c", "d"}});
  std::istringstream bad("a b c\n");
  CHECK_THROWS_AS(read_name_map(bad), std::runtime_error);
}
