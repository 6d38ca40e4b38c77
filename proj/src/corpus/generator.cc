#include "clonematch/corpus.h"

#include <algorithm>
#include <array>
#include <set>
#include <string_view>

#include <fmt/args.h>
#include <fmt/format.h>

#include "clonematch/rng.h"

namespace clonematch {

namespace {

// Function shapes. Placeholders: {n} function name, {a}..{e} distinct
// scratch registers, {C1}..{C4} constants unique across the corpus,
// {g1}..{g3} distinct globals, {f1} {f2} one-argument callees.
struct Kind {
  std::string_view name;
  int argc;
  std::string_view body;
};

constexpr std::array<Kind, 14> kKinds = {{
    {"sat_add", 2, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  load {b}, [fp+3]
  load {c}, [{g1}]
  add {a}, {b}
  add {a}, {c}
  cmp {a}, {C1}
  jle {n}.ok
  mov {a}, {C1}
  sub {a}, {C2}
{n}.ok:
  store [{g2}], {a}
  mov r0, {a}
  pop fp
  ret
)"},
    {"mix_globals", 0, R"(
  push fp
  mov fp, sp
  load {a}, [{g1}]
  load {b}, [{g2}]
  test {b}, {b}
  jz {n}.skip
  add {a}, {b}
  xor {a}, {C1}
{n}.skip:
  cmp {a}, {C2}
  jge {n}.big
  add {a}, {C3}
{n}.big:
  store [{g3}], {a}
  mov r0, {a}
  pop fp
  ret
)"},
    {"sum_table", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  and {a}, 7
  add {a}, 2
  mov {b}, 0
  mov {c}, {C1}
{n}.loop:
  cmp {b}, {a}
  jge {n}.done
  mov {d}, {b}
  and {d}, 3
  load {d}, [{d}+garr]
  mul {d}, {C2}
  add {c}, {d}
  add {b}, 1
  jmp {n}.loop
{n}.done:
  store [{g1}], {c}
  mov r0, {c}
  pop fp
  ret
)"},
    {"dispatch_switch", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  mod {a}, 5
  cmp {a}, 4
  jge {n}.def
  mov {b}, {a}
  add {b}, {n}.jt
  load {b}, [{b}]
  ijmp {b}
{n}.c0:
  mov r0, {C1}
  add r0, {a}
  jmp {n}.end
{n}.c1:
  load r0, [{g1}]
  xor r0, {C2}
  jmp {n}.end
{n}.c2:
  mov r0, {a}
  mul r0, 8
  add r0, {C3}
  jmp {n}.end
{n}.c3:
  load r0, [{g2}]
  cmp r0, {C4}
  jl {n}.end
  sub r0, {C4}
  jmp {n}.end
{n}.def:
  mov r0, 0
{n}.end:
  store [{g3}], r0
  pop fp
  ret
)"},
    {"call_indirect", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  and {a}, 1
  load {b}, [{a}+fptr]
  push {C1}
  icall {b}
  add sp, 1
  cmp r0, {C2}
  jle {n}.lo
  store [{g1}], r0
{n}.lo:
  load {c}, [{g2}]
  add r0, {c}
  pop fp
  ret
)"},
    {"heap_sum", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  and {a}, 7
  add {a}, 2
  push {a}
  libcall malloc
  add sp, 1
  mov {b}, r0
  push {a}
  push {C1}
  push {b}
  libcall memset
  add sp, 3
  load {c}, [{g1}]
  xor {c}, {C2}
  store [{b}], {c}
  mov {c}, 0
  mov {d}, 0
{n}.loop:
  cmp {d}, {a}
  jge {n}.done
  mov {e}, {b}
  add {e}, {d}
  load {e}, [{e}]
  add {c}, {e}
  add {d}, 1
  jmp {n}.loop
{n}.done:
  push {b}
  libcall free
  add sp, 1
  store [{g2}], {c}
  mov r0, {c}
  pop fp
  ret
)"},
    {"copy_measure", 0, R"(
  push fp
  mov fp, sp
  push 6
  libcall malloc
  add sp, 1
  mov {b}, r0
  push 5
  push garr
  push {b}
  libcall memcpy
  add sp, 3
  push {b}
  libcall strlen
  add sp, 1
  mov {c}, r0
  cmp {c}, {C1}
  jge {n}.long
  add {c}, {C2}
{n}.long:
  load {d}, [{b}+1]
  add {d}, {c}
  store [{g1}], {d}
  mov r0, {d}
  pop fp
  ret
)"},
    {"fact_like", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  and {a}, 7
  cmp {a}, 1
  jg {n}.rec
  mov r0, {C1}
  jmp {n}.out
{n}.rec:
  sub {a}, 1
  push {a}
  call {n}
  add sp, 1
  load {a}, [fp+2]
  and {a}, 7
  mul r0, {a}
  add r0, {C2}
{n}.out:
  pop fp
  ret
)"},
    {"combine", 2, R"(
  push fp
  mov fp, sp
  sub sp, 1
  load {a}, [fp+2]
  xor {a}, {C1}
  push {a}
  call {f1}
  add sp, 1
  store [fp-1], r0
  load {a}, [fp+3]
  push {a}
  call {f2}
  add sp, 1
  load {b}, [fp-1]
  cmp r0, {b}
  jge {n}.keep
  mov r0, {b}
{n}.keep:
  add r0, {C2}
  store [{g1}], r0
  mov sp, fp
  pop fp
  ret
)"},
    {"clamp3", 3, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  load {b}, [fp+3]
  load {c}, [fp+4]
  push {b}
  push {a}
  libcall min
  add sp, 2
  mov {d}, r0
  push {c}
  push {d}
  libcall max
  add sp, 2
  mov {d}, r0
  sub {d}, {C1}
  push {d}
  libcall abs
  add sp, 1
  cmp r0, {C2}
  jl {n}.small
  load {e}, [{g1}]
  add r0, {e}
  store [{g2}], r0
{n}.small:
  pop fp
  ret
)"},
    {"noise", 0, R"(
  push fp
  mov fp, sp
  libcall rand
  and r0, 255
  mov {a}, r0
  load {b}, [{g1}]
  add {a}, {b}
  cmp {a}, {C1}
  jle {n}.low
  store [{g2}], {a}
{n}.low:
  libcall time
  sub r0, {C2}
  cmp r0, {C3}
  jg {n}.late
  add {a}, 1
{n}.late:
  mov r0, {a}
  pop fp
  ret
)"},
    {"bit_twiddle", 1, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  mov {b}, {a}
  shl {b}, 3
  xor {b}, {C1}
  shr {a}, 2
  and {a}, {C2}
  or {a}, {b}
  test {a}, 1
  jz {n}.even
  load {c}, [{g1}]
  add {a}, {c}
{n}.even:
  cmp {a}, {C3}
  jl {n}.keep
  not {a}
{n}.keep:
  store [{g2}], {a}
  mov r0, {a}
  pop fp
  ret
)"},
    {"read_extra", 0, R"(
  push fp
  mov fp, sp
  libcall read_int
  mov {a}, r0
  mov {b}, {a}
  mul {b}, 4
  mov {c}, 0
  test {a}, {a}
  jz {n}.zero
  add {c}, {C1}
{n}.zero:
  cmp {b}, {C2}
  jle {n}.out
  load {d}, [{g1}]
  add {c}, {d}
{n}.out:
  store [{g2}], {c}
  mov r0, {c}
  pop fp
  ret
)"},
    {"div_mod", 2, R"(
  push fp
  mov fp, sp
  load {a}, [fp+2]
  load {b}, [fp+3]
  or {b}, 1
  mov {c}, {a}
  div {c}, {b}
  mod {a}, {b}
  cmp {c}, {C1}
  jge {n}.big
  load {d}, [{g1}]
  add {a}, {d}
{n}.big:
  cmp {a}, 0
  jz {n}.out
  add {c}, {C2}
{n}.out:
  store [{g2}], {c}
  mov r0, {c}
  pop fp
  ret
)"},
}};

constexpr int kGlobals = 12;

std::string fill(std::string_view tmpl, const fmt::dynamic_format_arg_store<fmt::format_context>& args) {
  return fmt::vformat(tmpl, args);
}

}  // namespace

std::vector<Word> random_inputs(std::uint64_t seed, std::size_t n) {
  Rng rng(mix_seed(seed, 0x1A9u));
  std::vector<Word> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Mix small and full-range values so branches go both ways.
    out.push_back(rng.chance(0.5) ? static_cast<Word>(rng.below(64))
                                  : static_cast<Word>(rng.next()));
  }
  return out;
}

std::vector<CorpusProgram> generate_corpus(const CorpusOptions& options) {
  Rng rng(options.seed);
  std::set<Word> used_constants;
  auto unique_constant = [&] {
    for (;;) {
      const auto c = static_cast<Word>(rng.range(100, 200000));
      if (used_constants.insert(c).second) return c;
    }
  };

  std::vector<CorpusProgram> corpus;
  for (int p = 0; p < options.programs; ++p) {
    std::string text = fmt::format("; generated program {}\n.data\n", p);
    for (int g = 0; g < kGlobals; ++g) {
      text += fmt::format("g{}: .word {}\n", g, rng.range(0, 5000));
    }
    text += fmt::format("garr: .word {}, {}, {}, 0, {}\n", rng.range(1, 900),
                        rng.range(1, 900), rng.range(1, 900), rng.range(1, 900));

    // One-argument leaves serve as indirect-call targets and as callees.
    std::vector<std::string> leaves = {"sum_table", "dispatch_switch", "bit_twiddle"};
    rng.shuffle(leaves);
    text += fmt::format("fptr: .word @{}, @{}\n", leaves[0], leaves[1]);
    text += ".rodata\n";
    text += "dispatch_switch.jt: .word @dispatch_switch.c0, @dispatch_switch.c1, "
            "@dispatch_switch.c2, @dispatch_switch.c3\n";
    text += ".text\n";

    std::vector<std::size_t> order(kKinds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    for (std::size_t k : order) {
      const Kind& kind = kKinds[k];
      std::vector<Reg> regs = {Reg::r1, Reg::r2, Reg::r3, Reg::r4, Reg::r5, Reg::r6, Reg::r7};
      rng.shuffle(regs);
      std::vector<int> globals(kGlobals);
      for (int g = 0; g < kGlobals; ++g) globals[g] = g;
      rng.shuffle(globals);
      std::vector<std::string> callees = {"sum_table", "dispatch_switch", "bit_twiddle",
                                          "heap_sum"};
      rng.shuffle(callees);

      fmt::dynamic_format_arg_store<fmt::format_context> args;
      args.push_back(fmt::arg("n", kind.name));
      static constexpr std::array<const char*, 5> kRegSlots = {"a", "b", "c", "d", "e"};
      for (std::size_t i = 0; i < kRegSlots.size(); ++i) {
        args.push_back(fmt::arg(kRegSlots[i], std::string(reg_name(regs[i]))));
      }
      static constexpr std::array<const char*, 4> kConstSlots = {"C1", "C2", "C3", "C4"};
      for (const char* slot : kConstSlots) args.push_back(fmt::arg(slot, unique_constant()));
      static constexpr std::array<const char*, 3> kGlobalSlots = {"g1", "g2", "g3"};
      for (std::size_t i = 0; i < kGlobalSlots.size(); ++i) {
        args.push_back(fmt::arg(kGlobalSlots[i], fmt::format("g{}", globals[i])));
      }
      args.push_back(fmt::arg("f1", callees[0]));
      args.push_back(fmt::arg("f2", callees[1]));
      text += fmt::format("func {}:", kind.name);
      text += fill(kind.body, args);
      text += "endfunc\n";
    }

    // main: four inputs into locals, then one call per function.
    text += "func main:\n  push fp\n  mov fp, sp\n  sub sp, 4\n";
    for (int i = 1; i <= 4; ++i) {
      text += fmt::format("  libcall read_int\n  store [fp-{}], r0\n", i);
    }
    std::vector<std::size_t> calls = order;
    rng.shuffle(calls);
    for (std::size_t k : calls) {
      const Kind& kind = kKinds[k];
      for (int arg = kind.argc; arg >= 1; --arg) {
        const int local = static_cast<int>(rng.range(1, 4));
        text += fmt::format("  load r1, [fp-{}]\n", local);
        if (rng.chance(0.5)) text += fmt::format("  add r1, {}\n", rng.range(1, 99));
        text += "  push r1\n";
      }
      text += fmt::format("  call {}\n", kind.name);
      if (kind.argc > 0) text += fmt::format("  add sp, {}\n", kind.argc);
      text += "  push r0\n  libcall print_int\n  add sp, 1\n";
    }
    text += "  mov r0, 0\n  mov sp, fp\n  pop fp\n  ret\nendfunc\n";

    CorpusProgram prog;
    prog.name = fmt::format("prog{}", p);
    prog.module = parse_module(text);
    prog.source = std::move(text);
    prog.inputs = random_inputs(mix_seed(options.seed, static_cast<std::uint64_t>(p)));
    corpus.push_back(std::move(prog));
  }
  return corpus;
}

}  // namespace clonematch
