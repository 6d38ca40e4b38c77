#include "clonematch/matcher.h"

#include <algorithm>
#include <atomic>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "trace/text_util.h"

namespace clonematch {

namespace {

bool rank_before(const RankedTarget& x, const RankedTarget& y) {
  if (x.skipped != y.skipped) return !x.skipped;
  if (x.score.score != y.score.score) return x.score.score > y.score.score;
  return x.target.entry < y.target.entry;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

MatchReport match_template(const FunctionTrace& templ, const ModuleImage& target,
                           const MatchOptions& options) {
  MatchReport report;
  report.template_function = templ.function;
  report.template_sig_len = templ.signature.size();

  std::vector<std::size_t> candidates;
  std::vector<RankedTarget> skipped;
  for (std::size_t i = 0; i < target.functions.size(); ++i) {
    if (detect_arg_count(target, target.functions[i]) == templ.info.arg_count) {
      candidates.push_back(i);
    } else {
      ++report.skipped_count;
      if (options.include_skipped) {
        RankedTarget r;
        r.target = target.functions[i];
        r.score = jaccard(templ.signature.size(), 0, 0);
        r.skipped = true;
        skipped.push_back(std::move(r));
      }
    }
  }

  std::vector<RankedTarget> ranked(candidates.size());
  parallel_for(candidates.size(), options.jobs, [&](std::size_t k) {
    const FunctionEntry& fn = target.functions[candidates[k]];
    EmulationResult emu = emulate_function(target, fn, templ.info, options.limits);
    RankedTarget& r = ranked[k];
    r.target = fn;
    r.outcome = std::move(emu.outcome);
    if (r.outcome.kind == EmulationOutcome::Kind::kAbortedUnknownIndirectTarget) {
      r.score = SimilarityScore{0.0, 0, templ.signature.size(), emu.signature.size()};
    } else {
      r.score = similarity(templ.signature, emu.signature);
    }
  });

  ranked.insert(ranked.end(), skipped.begin(), skipped.end());
  std::sort(ranked.begin(), ranked.end(), rank_before);
  report.ranked = std::move(ranked);
  return report;
}

void write_match_report(std::ostream& out, const MatchReport& report,
                        std::optional<std::size_t> top) {
  out << fmt::format("TEMPLATE {} {} sig_len={}\n", hex_word(report.template_function.entry),
                     report.template_function.display_name(), report.template_sig_len);
  const std::size_t n = top ? std::min(*top, report.ranked.size()) : report.ranked.size();
  for (std::size_t k = 0; k < n; ++k) {
    const RankedTarget& r = report.ranked[k];
    out << fmt::format("RANK {} SCORE {:.6f} ADDR {} NAME {} OUTCOME {}\n", k + 1, r.score.score,
                       hex_word(r.target.entry), r.target.display_name(),
                       r.skipped ? std::string_view("skipped") : r.outcome.tag());
  }
}

AccuracyReport evaluate_accuracy(const std::vector<FunctionTrace>& templates,
                                 const ModuleImage& target, const NameMap& truth,
                                 const NameMap* inline_map, const MatchOptions& options) {
  AccuracyReport report;
  for (const FunctionTrace& t : templates) {
    const std::string name = t.function.display_name();
    auto it = truth.find(name);
    if (!t.function.name || it == truth.end()) {
      report.missing_truth.push_back(name);
      continue;
    }
    MatchOptions opts = options;
    opts.include_skipped = false;
    const MatchReport m = match_template(t, target, opts);

    TemplateVerdict v;
    v.template_name = name;
    v.expected = it->second;
    v.top1 = "?";
    if (!m.ranked.empty()) {
      const RankedTarget& best = m.ranked.front();
      v.top1 = best.target.display_name();
      v.top1_score = best.score.score;
      bool hit = v.top1 == v.expected;
      if (!hit && inline_map != nullptr) {
        auto host = inline_map->find(v.expected);
        hit = host != inline_map->end() && host->second == v.top1;
      }
      v.correct = hit && best.score.score > 0.0 && best.target.name.has_value();
    }
    ++report.templates_total;
    if (v.correct) ++report.correct_top1;
    report.verdicts.push_back(std::move(v));
  }
  if (report.templates_total > 0) {
    report.accuracy =
        static_cast<double>(report.correct_top1) / static_cast<double>(report.templates_total);
  }
  return report;
}

void write_accuracy_report(std::ostream& out, const AccuracyReport& report) {
  for (const TemplateVerdict& v : report.verdicts) {
    out << fmt::format("VERDICT {} {} TOP1 {} SCORE {:.6f} EXPECT {}\n", v.template_name,
                       v.correct ? "ok" : "miss", v.top1, v.top1_score, v.expected);
  }
  for (const std::string& name : report.missing_truth) out << "NOTRUTH " << name << '\n';
  out << fmt::format("ACCURACY {}/{} = {:.6f}\n", report.correct_top1, report.templates_total,
                     report.accuracy);
}

NameMap read_name_map(std::istream& in) {
  NameMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw std::runtime_error(fmt::format("name map line {}: expected two names", lineno));
    }
    map[std::string(fields[0])] = std::string(fields[1]);
  }
  return map;
}

}  // namespace clonematch
