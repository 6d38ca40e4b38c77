#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "clonematch/program.h"
#include "clonematch/tracer.h"
#include "support.h"

using namespace clonematch;

namespace {

ParseError::Kind error_kind(std::string_view text) {
  try {
    parse_module(text);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("module parsed without error");
  return ParseError::Kind::kSyntax;
}

}  // namespace

TEST_CASE("minimal module has one function and one instruction") {
  const ModuleImage m = parse_module(".text\nfunc main:\n  halt\nendfunc\n");
  REQUIRE(m.functions.size() == 1);
  CHECK(m.code.size() == 1);
  CHECK(m.functions[0].name == "main");
  CHECK(m.functions[0].entry == 0);
  CHECK(m.functions[0].length == 1);
  CHECK(m.code[0].op == Opcode::kHalt);
}

TEST_CASE("rodata code literals resolve to label addresses") {
  const ModuleImage m = parse_module(R"(
.rodata
tbl: .word @case0, @case1, 7
.text
func sw:
  mov r0, 1
case0:
  mov r0, 2
case1:
  ret
endfunc
)");
  REQUIRE(m.rodata.size() == 3);
  CHECK(m.rodata[0] == DataWord{m.code_labels.at("case0"), true});
  CHECK(m.rodata[1] == DataWord{m.code_labels.at("case1"), true});
  CHECK(m.rodata[0].value == 1);
  CHECK(m.rodata[1].value == 2);
  CHECK(m.rodata[2] == DataWord{7, false});
  CHECK(m.data_labels.at("tbl") == kRodataBase);
}

TEST_CASE("operand forms parse") {
  const ModuleImage m = parse_module(R"(
.data
g: .word 5, 0x10
.text
func f:
  load r1, [0x1001]
  load r2, [g]
  load r3, [fp+2]
  load r4, [r3-1]
  store [r5], r6
  add r1, 0xFFFFFFFF
  libcall malloc
  ret
endfunc
)");
  CHECK(m.code[0].b == Operand::mem_abs(0x1001));
  CHECK(m.code[1].b == Operand::mem_abs(kDataBase));
  CHECK(m.code[2].b == Operand::mem(Reg::fp, 2));
  CHECK(m.code[3].b == Operand::mem(Reg::r3, -1));
  CHECK(m.code[4].a == Operand::mem(Reg::r5, 0));
  CHECK(m.code[5].b == Operand::imm(0xFFFFFFFFu));
  CHECK(m.code[6].a == Operand::libcall("malloc"));
  CHECK(m.data[1].value == 0x10);
}

TEST_CASE("each malformed module gets its own diagnostic") {
  CHECK(error_kind(".text\nfunc f:\n  jmp nowhere\nendfunc\n") ==
        ParseError::Kind::kUnresolvedLabel);
  CHECK(error_kind(".rodata\nt: .word @nowhere\n.text\nfunc f:\n  ret\nendfunc\n") ==
        ParseError::Kind::kUnresolvedLabel);
  CHECK(error_kind(".text\nfunc f:\nx:\n  ret\nx:\n  ret\nendfunc\n") ==
        ParseError::Kind::kDuplicateLabel);
  CHECK(error_kind(".text\nfunc f:\n  ijmp 3\nendfunc\n") == ParseError::Kind::kOperandShape);
  CHECK(error_kind(".text\nfunc f:\n  cmp r1\nendfunc\n") == ParseError::Kind::kOperandShape);
  CHECK(error_kind(".text\nfunc f:\n  frob r1\nendfunc\n") == ParseError::Kind::kSyntax);
  CHECK(error_kind(".text\nfunc f:\n  call inner\ninner:\n  ret\nendfunc\n") ==
        ParseError::Kind::kBadCallTarget);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_module(".text\nfunc f:\n  mov r1, @@\nendfunc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 0);
  }
}

TEST_CASE("validation rejects overlapping functions") {
  ModuleImage m = parse_module(".text\nfunc a:\n  ret\nendfunc\nfunc b:\n  ret\nendfunc\n");
  m.functions[0].length = 2;
  try {
    validate_module(m);
    FAIL("expected overlap to be rejected");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kOverlappingFunctions);
  }
}

TEST_CASE("validation rejects a direct call into a function body") {
  ModuleImage m = parse_module(
      ".text\nfunc a:\n  call b\n  ret\nendfunc\nfunc b:\n  mov r0, 1\n  ret\nendfunc\n");
  m.code[0].a = Operand::code(m.functions[1].entry + 1);
  try {
    validate_module(m);
    FAIL("expected the call to be rejected");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kBadCallTarget);
  }
}

TEST_CASE("argument count is the highest fp slot minus one") {
  const ModuleImage m = parse_module(R"(
.text
func three:
  push fp
  mov fp, sp
  load r1, [fp+2]
  load r2, [fp+4]
  pop fp
  ret
endfunc
func none:
  mov r0, 3
  ret
endfunc
func locals_only:
  push fp
  mov fp, sp
  load r1, [fp-1]
  load r2, [fp+1]
  pop fp
  ret
endfunc
func main:
  push 30
  push 20
  push 10
  call three
  add sp, 3
  halt
endfunc
)");
  CHECK(detect_arg_count(m, m.functions[0]) == 3);
  CHECK(detect_arg_count(m, m.functions[1]) == 0);
  CHECK(detect_arg_count(m, m.functions[2]) == 0);

  const TraceSet t = testing::trace_main(m);
  const FunctionTrace* three = t.find("three");
  REQUIRE(three != nullptr);
  REQUIRE(three->info.activations.size() == 1);
  CHECK(three->info.activations[0] == std::map<int, Word>{{1, 10}, {3, 30}});
}

TEST_CASE("strip removes names only and is idempotent") {
  const ModuleImage& m = testing::default_corpus()[0].module;
  const ModuleImage s = strip(m);
  REQUIRE(s.functions.size() == m.functions.size());
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    CHECK_FALSE(s.functions[i].name.has_value());
    CHECK(s.functions[i].entry == m.functions[i].entry);
    CHECK(s.functions[i].length == m.functions[i].length);
  }
  CHECK(s.code == m.code);
  CHECK(s.data == m.data);
  CHECK(s.rodata == m.rodata);
  CHECK(s.code_labels.empty());
  CHECK(s.data_labels.empty());
  CHECK(strip(s) == s);
}

TEST_CASE("names never affect a trace") {
  for (const CorpusProgram& p : testing::default_corpus()) {
    const ModuleImage s = strip(p.module);
    const Word main_entry = p.module.functions[testing::function_index(p.module, "main")].entry;
    TraceSet named = trace_run(p.module, main_entry, p.inputs);
    TraceSet stripped = trace_run(s, main_entry, p.inputs);
    for (FunctionTrace& f : named.functions) f.function.name.reset();
    CHECK(named == stripped);
  }
}

TEST_CASE("printing and reparsing yields the same image") {
  for (const CorpusProgram& p : testing::default_corpus()) {
    const ModuleImage again = parse_module(print_module(p.module));
    CHECK(again.code == p.module.code);
    CHECK(again.data == p.module.data);
    CHECK(again.rodata == p.module.rodata);
    CHECK(again.functions == p.module.functions);
    CHECK(print_module(again) == print_module(p.module));
  }
  const ModuleImage s = strip(testing::default_corpus()[1].module);
  const ModuleImage again = parse_module(print_module(s));
  CHECK(again.code == s.code);
  CHECK(again.rodata == s.rodata);
  CHECK(again.functions.size() == s.functions.size());
}

TEST_CASE("argument count survives strip") {
  for (const CorpusProgram& p : testing::default_corpus()) {
    const ModuleImage s = strip(p.module);
    for (std::size_t i = 0; i < p.module.functions.size(); ++i) {
      CHECK(detect_arg_count(s, s.functions[i]) ==
            detect_arg_count(p.module, p.module.functions[i]));
    }
  }
}
