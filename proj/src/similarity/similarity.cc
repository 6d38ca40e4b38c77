#include "clonematch/similarity.h"

#include <algorithm>
#include <span>
#include <stdexcept>

#include <fmt/format.h>

namespace clonematch {

std::size_t lcs_length_naive(const Signature& a, const Signature& b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<std::vector<std::size_t>> t(m + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[m][n];
}

namespace {

using Span = std::span<const Feature>;

// Last row of the LCS table of a against b: row[j] = LCS(a, b[0..j)).
// Walks a and b in reverse when `reversed` is set.
std::vector<std::size_t> lcs_row(Span a, Span b, bool reversed) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  for (std::size_t i = 1; i <= m; ++i) {
    const Feature& x = reversed ? a[m - i] : a[i - 1];
    for (std::size_t j = 1; j <= n; ++j) {
      const Feature& y = reversed ? b[n - j] : b[j - 1];
      cur[j] = x == y ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev;
}

void hirschberg(Span a, Span b, std::size_t ai, std::size_t bi,
                std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (a.empty() || b.empty()) return;
  if (a.size() == 1) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[0] == b[j]) {
        out.emplace_back(ai, bi + j);
        return;
      }
    }
    return;
  }
  const std::size_t mid = a.size() / 2;
  const auto left = lcs_row(a.first(mid), b, false);
  const auto right = lcs_row(a.subspan(mid), b, true);
  std::size_t split = 0;
  std::size_t best = 0;
  for (std::size_t j = 0; j <= b.size(); ++j) {
    const std::size_t v = left[j] + right[b.size() - j];
    if (v > best || j == 0) {
      best = v;
      split = j;
    }
  }
  hirschberg(a.first(mid), b.first(split), ai, bi, out);
  hirschberg(a.subspan(mid), b.subspan(split), ai + mid, bi + split, out);
}

}  // namespace

std::size_t lcs_length(const Signature& a, const Signature& b) {
  // The row spans the shorter sequence.
  if (a.size() < b.size()) return lcs_row(Span(b), Span(a), false).back();
  return lcs_row(Span(a), Span(b), false).back();
}

std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(const Signature& a,
                                                               const Signature& b) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  hirschberg(Span(a), Span(b), 0, 0, out);
  return out;
}

SimilarityScore jaccard(std::size_t len_f, std::size_t len_t, std::size_t lcs) {
  if (lcs > len_f || lcs > len_t) {
    throw std::invalid_argument(
        fmt::format("lcs {} exceeds a sequence length ({}, {})", lcs, len_f, len_t));
  }
  SimilarityScore s{0.0, lcs, len_f, len_t};
  const std::size_t denom = len_f + len_t - lcs;
  if (denom > 0) s.score = static_cast<double>(lcs) / static_cast<double>(denom);
  return s;
}

SimilarityScore similarity(const Signature& f, const Signature& t) {
  return jaccard(f.size(), t.size(), lcs_length(f, t));
}

}  // namespace clonematch
