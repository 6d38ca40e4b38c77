#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "clonematch/tracer.h"
#include "trace/text_util.h"

namespace clonematch {

void write_function_trace(std::ostream& out, const FunctionTrace& trace) {
  const RuntimeInfo& info = trace.info;
  out << "FUNC " << hex_word(trace.function.entry) << ' ' << trace.function.display_name()
      << '\n';
  out << "ARGC " << info.arg_count << '\n';
  for (std::size_t k = 0; k < info.activations.size(); ++k) {
    out << "ACT " << k << '\n';
    for (const auto& [slot, value] : info.activations[k]) {
      out << "ARG " << slot << ' ' << hex_word(value) << '\n';
    }
  }
  for (Word v : info.global_reads) out << "GLOBAL " << hex_word(v) << '\n';
  for (const IcallEvent& e : info.icall_events) {
    out << "ICALL " << hex_word(e.target) << ' ' << hex_word(e.ret) << '\n';
  }
  for (const auto& [f, values] : info.libcall_results) {
    for (Word v : values) out << "LIBRET " << libcall_name(f) << ' ' << hex_word(v) << '\n';
  }
  for (Word v : info.sub_returns) out << "SUBRET " << hex_word(v) << '\n';
  write_signature(out, trace.signature);
  out << "END\n";
}

std::string format_function_trace(const FunctionTrace& trace) {
  std::ostringstream out;
  out << kFormatHeader << '\n';
  write_function_trace(out, trace);
  return out.str();
}

namespace {

[[noreturn]] void fail(int lineno, std::string_view what) {
  throw std::runtime_error(fmt::format("trace line {}: {}", lineno, what));
}

Word word_field(std::string_view s, int lineno) {
  auto v = parse_word(s);
  if (!v) fail(lineno, fmt::format("bad number '{}'", s));
  return *v;
}

}  // namespace

std::vector<FunctionTrace> read_function_traces(std::istream& in) {
  std::vector<FunctionTrace> out;
  std::optional<FunctionTrace> cur;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string_view tag = fields[0];
    auto expect = [&](std::size_t n) {
      if (fields.size() != n) fail(lineno, fmt::format("malformed {} line", tag));
    };

    if (tag == "FUNC") {
      expect(3);
      if (cur) fail(lineno, "FUNC before END");
      cur.emplace();
      cur->function.entry = word_field(fields[1], lineno);
      if (fields[2] != "?") cur->function.name = std::string(fields[2]);
      continue;
    }
    if (!cur) fail(lineno, fmt::format("'{}' outside a FUNC block", tag));
    RuntimeInfo& info = cur->info;

    if (tag == "ARGC") {
      expect(2);
      info.arg_count = static_cast<int>(word_field(fields[1], lineno));
    } else if (tag == "ACT") {
      expect(2);
      if (word_field(fields[1], lineno) != info.activations.size()) {
        fail(lineno, "activations out of order");
      }
      info.activations.emplace_back();
    } else if (tag == "ARG") {
      expect(3);
      if (info.activations.empty()) info.activations.emplace_back();
      const auto slot = static_cast<int>(word_field(fields[1], lineno));
      if (slot < 1) fail(lineno, "argument slots start at 1");
      info.activations.back()[slot] = word_field(fields[2], lineno);
    } else if (tag == "GLOBAL") {
      expect(2);
      info.global_reads.push_back(word_field(fields[1], lineno));
    } else if (tag == "ICALL") {
      expect(3);
      info.icall_events.push_back({word_field(fields[1], lineno), word_field(fields[2], lineno)});
    } else if (tag == "LIBRET") {
      expect(3);
      auto f = lookup_libcall(fields[1]);
      if (!f) fail(lineno, fmt::format("unknown libcall '{}'", fields[1]));
      info.libcall_results[*f].push_back(word_field(fields[2], lineno));
    } else if (tag == "SUBRET") {
      expect(2);
      info.sub_returns.push_back(word_field(fields[1], lineno));
    } else if (tag == "SIG") {
      expect(2);
      const Word n = word_field(fields[1], lineno);
      for (Word i = 0; i < n; ++i) {
        if (!std::getline(in, line)) fail(lineno, "truncated SIG block");
        ++lineno;
        auto f = parse_feature(line);
        if (!f) fail(lineno, fmt::format("bad feature '{}'", line));
        cur->signature.push_back(*f);
      }
    } else if (tag == "END") {
      expect(1);
      if (info.activations.empty()) info.activations.emplace_back();
      out.push_back(std::move(*cur));
      cur.reset();
    } else {
      fail(lineno, fmt::format("unknown record '{}'", tag));
    }
  }
  if (cur) fail(lineno, "missing END");
  return out;
}

void write_run_log(std::ostream& out, const TraceSet& traces) {
  out << kFormatHeader << '\n';
  out << "STATUS " << run_state_name(traces.status) << '\n';
  if (!traces.fault.empty()) out << "FAULT " << traces.fault << '\n';
  out << "EXIT " << hex_word(traces.exit_value) << '\n';
  out << "STEPS " << traces.steps << '\n';
  for (Word v : traces.output) out << "OUT " << hex_word(v) << '\n';
}

}  // namespace clonematch
