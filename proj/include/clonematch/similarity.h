#pragma once

// LCS-based Jaccard similarity between signatures.

#include <cstddef>
#include <utility>
#include <vector>

#include "clonematch/feature.h"

namespace clonematch {

struct SimilarityScore {
  double score = 0.0;
  std::size_t lcs_len = 0;
  std::size_t len_f = 0;
  std::size_t len_t = 0;

  friend bool operator==(const SimilarityScore&, const SimilarityScore&) = default;
};

// Full-table dynamic program, O(mn) memory. Reference implementation.
std::size_t lcs_length_naive(const Signature& a, const Signature& b);

// Two-row dynamic program over the shorter sequence: O(min(m, n)) memory.
std::size_t lcs_length(const Signature& a, const Signature& b);

// Hirschberg's divide and conquer: one longest common subsequence as index
// pairs (i into a, j into b), increasing in both, in linear space.
std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(const Signature& a,
                                                               const Signature& b);

// lcs / (len_f + len_t - lcs); 0 when both lengths are 0. Throws
// std::invalid_argument when lcs exceeds either length.
SimilarityScore jaccard(std::size_t len_f, std::size_t len_t, std::size_t lcs);

SimilarityScore similarity(const Signature& f, const Signature& t);

}  // namespace clonematch
