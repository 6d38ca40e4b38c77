#pragma once

// Shared fixtures for the unit tests.

#include <string_view>
#include <vector>

#include "doctest.h"

#include "clonematch/corpus.h"
#include "clonematch/feature.h"
#include "clonematch/program.h"
#include "clonematch/tracer.h"

namespace clonematch::testing {

inline const std::vector<CorpusProgram>& default_corpus() {
  static const std::vector<CorpusProgram> corpus = generate_corpus({.seed = 1, .programs = 4});
  return corpus;
}

inline TraceSet trace_main(const ModuleImage& m, const std::vector<Word>& inputs = {}) {
  return trace_run(m, std::string("main"), inputs);
}

inline std::size_t function_index(const ModuleImage& m, std::string_view name) {
  return m.find_function(name).value();
}

// The exit-relevant part of a run: what a behavior-preserving transform
// must leave unchanged.
struct Observable {
  std::vector<Word> output;
  RunState status;
  Word exit_value;
  friend bool operator==(const Observable&, const Observable&) = default;
};

inline Observable observe(const TraceSet& t) { return {t.output, t.status, t.exit_value}; }

}  // namespace clonematch::testing

namespace doctest {

template <>
struct StringMaker<clonematch::Feature> {
  static String convert(const clonematch::Feature& f) {
    return clonematch::format_feature(f).c_str();
  }
};

template <>
struct StringMaker<clonematch::Signature> {
  static String convert(const clonematch::Signature& s) {
    std::string out = "[";
    for (const clonematch::Feature& f : s) out += (out.size() > 1 ? ", " : "") + format_feature(f);
    return (out + "]").c_str();
  }
};

template <>
struct StringMaker<std::vector<clonematch::Word>> {
  static String convert(const std::vector<clonematch::Word>& v) {
    std::string out = "[";
    for (clonematch::Word w : v) out += (out.size() > 1 ? ", " : "") + std::to_string(w);
    return (out + "]").c_str();
  }
};

}  // namespace doctest
