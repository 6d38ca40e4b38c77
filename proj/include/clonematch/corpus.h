#pragma once

// Seeded generator of MiniVM test programs used by the accuracy
// experiments and the property tests.

#include <cstdint>
#include <string>
#include <vector>

#include "clonematch/program.h"

namespace clonematch {

struct CorpusProgram {
  std::string name;
  std::string source;
  ModuleImage module;
  std::vector<Word> inputs;  // default trace input
};

struct CorpusOptions {
  std::uint64_t seed = 1;
  int programs = 4;
};

// Every function of a generated program runs on every input: `main` reads
// five inputs through read_int (four itself, one in a callee), calls each
// function and prints its result. Programs never fault on any input.
std::vector<CorpusProgram> generate_corpus(const CorpusOptions& options = {});

// Number of read_int calls a generated program makes.
inline constexpr std::size_t kCorpusInputCount = 5;

std::vector<Word> random_inputs(std::uint64_t seed, std::size_t n = kCorpusInputCount);

}  // namespace clonematch
