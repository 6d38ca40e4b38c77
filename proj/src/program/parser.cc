#include <cctype>
#include <charconv>
#include <limits>

#include <fmt/format.h>

#include "clonematch/program.h"
#include "program/shape.h"

namespace clonematch {

namespace {

using K = ParseError::Kind;

struct Token {
  enum class Kind { kIdent, kNumber, kPunct };
  Kind kind;
  std::string text;
  int col;
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::vector<Token> tokenize(std::string_view line, int lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ';') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const int col = static_cast<int>(i) + 1;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < line.size() && ident_char(line[j])) ++j;
      out.push_back({Token::Kind::kIdent, std::string(line.substr(i, j - i)), col});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < line.size() && std::isalnum(static_cast<unsigned char>(line[j]))) ++j;
      out.push_back({Token::Kind::kNumber, std::string(line.substr(i, j - i)), col});
      i = j;
    } else if (std::string_view(":,[]+-@").find(c) != std::string_view::npos) {
      out.push_back({Token::Kind::kPunct, std::string(1, c), col});
      ++i;
    } else {
      throw ParseError(K::kSyntax, lineno, col, fmt::format("unexpected character '{}'", c));
    }
  }
  return out;
}

// Parses an unsigned literal; the caller applies a leading minus sign.
std::uint64_t parse_number(const Token& tok, int lineno) {
  std::string_view s = tok.text;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size() || v > 0xFFFFFFFFull) {
    throw ParseError(K::kSyntax, lineno, tok.col, fmt::format("bad number '{}'", tok.text));
  }
  return v;
}

enum class Section { kNone, kData, kRodata, kText };

enum class RefKind {
  kCode,        // code label only: jump/call targets and `@label`
  kDataOrCode,  // bare identifier used as a value
  kDataAddend,  // data label inside a memory operand
};

enum class Slot { kA, kB, kData, kRodata };

struct Fixup {
  Slot slot;
  std::size_t index;  // instruction index or data word index
  std::string label;
  RefKind kind;
  bool negate;
  int line;
  int col;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ModuleImage run() {
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text_.size()) {
      std::size_t nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      ++lineno;
      parse_line(text_.substr(pos, nl - pos), lineno);
      pos = nl + 1;
    }
    if (open_function_) {
      throw ParseError(K::kSyntax, open_line_, 1, "missing 'endfunc'");
    }
    resolve();
    if (auto issue = find_validation_issue(module_)) {
      int line = 0;
      int col = 0;
      if (issue->pc && *issue->pc < inst_lines_.size()) {
        line = inst_lines_[*issue->pc];
        col = inst_cols_[*issue->pc];
      }
      throw ParseError(issue->kind, line, col, issue->message);
    }
    return std::move(module_);
  }

 private:
  void parse_line(std::string_view line, int lineno) {
    line_ = lineno;
    toks_ = tokenize(line, lineno);
    at_ = 0;
    if (toks_.empty()) return;

    const Token& first = toks_[0];
    if (first.kind == Token::Kind::kIdent) {
      if (first.text == ".data" || first.text == ".rodata" || first.text == ".text") {
        if (toks_.size() != 1) syntax(toks_[1], "unexpected token after section directive");
        if (open_function_) syntax(first, "section change inside a function");
        section_ = first.text == ".data"     ? Section::kData
                   : first.text == ".rodata" ? Section::kRodata
                                             : Section::kText;
        return;
      }
    }

    switch (section_) {
      case Section::kNone: syntax(first, "content before any section directive");
      case Section::kData:
      case Section::kRodata: parse_data_line(); return;
      case Section::kText: parse_text_line(); return;
    }
  }

  [[noreturn]] void syntax(const Token& tok, const std::string& msg) {
    throw ParseError(K::kSyntax, line_, tok.col, msg);
  }
  [[noreturn]] void syntax_eol(const std::string& msg) {
    throw ParseError(K::kSyntax, line_, toks_.empty() ? 1 : toks_.back().col, msg);
  }

  bool done() const { return at_ >= toks_.size(); }
  const Token& peek() {
    if (done()) syntax_eol("unexpected end of line");
    return toks_[at_];
  }
  const Token& next() {
    const Token& t = peek();
    ++at_;
    return t;
  }
  bool accept_punct(char c) {
    if (!done() && toks_[at_].kind == Token::Kind::kPunct && toks_[at_].text[0] == c) {
      ++at_;
      return true;
    }
    return false;
  }
  void expect_punct(char c) {
    if (!accept_punct(c)) {
      if (done()) syntax_eol(fmt::format("expected '{}'", c));
      syntax(toks_[at_], fmt::format("expected '{}'", c));
    }
  }
  bool label_ahead() const {
    return at_ + 1 < toks_.size() && toks_[at_].kind == Token::Kind::kIdent &&
           toks_[at_ + 1].kind == Token::Kind::kPunct && toks_[at_ + 1].text == ":";
  }

  void define_label(const Token& tok, bool code, Word addr) {
    if (module_.code_labels.count(tok.text) || module_.data_labels.count(tok.text)) {
      throw ParseError(K::kDuplicateLabel, line_, tok.col,
                       fmt::format("label '{}' already defined", tok.text));
    }
    if (parse_reg(tok.text) || parse_opcode(tok.text) || tok.text == "func" ||
        tok.text == "endfunc") {
      syntax(tok, fmt::format("reserved word '{}' used as a label", tok.text));
    }
    (code ? module_.code_labels : module_.data_labels)[tok.text] = addr;
  }

  std::vector<DataWord>& region() {
    return section_ == Section::kData ? module_.data : module_.rodata;
  }
  Word region_base() const { return section_ == Section::kData ? kDataBase : kRodataBase; }

  void parse_data_line() {
    while (label_ahead()) {
      const Token& name = next();
      ++at_;
      define_label(name, false, region_base() + static_cast<Word>(region().size()));
    }
    if (done()) return;
    const Token& dir = next();
    if (dir.kind != Token::Kind::kIdent || dir.text != ".word") {
      syntax(dir, "expected '.word'");
    }
    do {
      region().push_back(parse_data_value());
    } while (accept_punct(','));
    if (!done()) syntax(toks_[at_], "expected ',' or end of line");
  }

  DataWord parse_data_value() {
    const Slot slot = section_ == Section::kData ? Slot::kData : Slot::kRodata;
    const std::size_t index = region().size();
    if (accept_punct('@')) {
      const Token& name = next();
      if (name.kind != Token::Kind::kIdent) syntax(name, "expected label after '@'");
      fixups_.push_back({slot, index, name.text, RefKind::kCode, false, line_, name.col});
      return {0, true};
    }
    bool neg = accept_punct('-');
    const Token& tok = next();
    if (tok.kind == Token::Kind::kNumber) {
      Word v = static_cast<Word>(parse_number(tok, line_));
      return {neg ? static_cast<Word>(0u - v) : v, false};
    }
    if (tok.kind == Token::Kind::kIdent && !neg) {
      fixups_.push_back({slot, index, tok.text, RefKind::kDataOrCode, false, line_, tok.col});
      return {0, false};
    }
    syntax(tok, "expected a value");
  }

  void parse_text_line() {
    const Token& first = toks_[0];
    if (first.kind == Token::Kind::kIdent && first.text == "func") {
      if (open_function_) syntax(first, "nested 'func'");
      ++at_;
      FunctionEntry f;
      f.entry = static_cast<Word>(module_.code.size());
      if (!accept_punct(':')) {
        const Token& name = next();
        if (name.kind != Token::Kind::kIdent) syntax(name, "expected function name");
        define_label(name, true, f.entry);
        f.name = name.text;
        expect_punct(':');
      }
      if (!done()) syntax(toks_[at_], "unexpected token after function header");
      module_.functions.push_back(f);
      open_function_ = true;
      open_line_ = line_;
      return;
    }
    if (first.kind == Token::Kind::kIdent && first.text == "endfunc") {
      if (!open_function_) syntax(first, "'endfunc' without 'func'");
      if (toks_.size() != 1) syntax(toks_[1], "unexpected token after 'endfunc'");
      FunctionEntry& f = module_.functions.back();
      f.length = static_cast<Word>(module_.code.size()) - f.entry;
      open_function_ = false;
      return;
    }
    if (!open_function_) syntax(first, "instruction or label outside a function");
    while (label_ahead()) {
      const Token& name = next();
      ++at_;
      define_label(name, true, static_cast<Word>(module_.code.size()));
    }
    if (done()) return;
    parse_instruction();
  }

  void parse_instruction() {
    const Token& mnemonic = next();
    auto op = mnemonic.kind == Token::Kind::kIdent ? parse_opcode(mnemonic.text)
                                                   : std::nullopt;
    if (!op) syntax(mnemonic, fmt::format("unknown instruction '{}'", mnemonic.text));

    Instruction inst;
    inst.op = *op;
    const Shape shape = opcode_shape(*op);
    const std::size_t index = module_.code.size();
    int operand_count = 0;
    if (!done()) {
      inst.a = parse_operand(*op, Slot::kA, index);
      operand_count = 1;
      if (accept_punct(',')) {
        inst.b = parse_operand(*op, Slot::kB, index);
        operand_count = 2;
      }
      if (!done()) syntax(toks_[at_], "expected ',' or end of line");
    }
    const int expected = (shape.a != kNoOperand) + (shape.b != kNoOperand);
    if (operand_count != expected) {
      throw ParseError(K::kOperandShape, line_, mnemonic.col,
                       fmt::format("'{}' takes {} operand(s), got {}", mnemonic.text,
                                   expected, operand_count));
    }
    module_.code.push_back(inst);
    inst_lines_.push_back(line_);
    inst_cols_.push_back(mnemonic.col);
  }

  Operand parse_operand(Opcode op, Slot slot, std::size_t index) {
    const bool code_context = op == Opcode::kJmp || is_conditional_jump(op) ||
                              op == Opcode::kCall;
    if (op == Opcode::kLibcall) {
      const Token& name = next();
      if (name.kind != Token::Kind::kIdent) syntax(name, "expected library function name");
      return Operand::libcall(name.text);
    }
    if (accept_punct('@')) {
      const Token& name = next();
      if (name.kind != Token::Kind::kIdent) syntax(name, "expected label after '@'");
      fixups_.push_back({slot, index, name.text, RefKind::kCode, false, line_, name.col});
      return Operand::code(0);
    }
    if (accept_punct('[')) return parse_memory(slot, index);
    bool neg = accept_punct('-');
    const Token& tok = next();
    if (tok.kind == Token::Kind::kNumber) {
      Word v = static_cast<Word>(parse_number(tok, line_));
      return Operand::imm(neg ? static_cast<Word>(0u - v) : v);
    }
    if (tok.kind != Token::Kind::kIdent || neg) syntax(tok, "expected an operand");
    if (auto r = parse_reg(tok.text)) return Operand::of_reg(*r);
    fixups_.push_back({slot, index, tok.text,
                       code_context ? RefKind::kCode : RefKind::kDataOrCode, false, line_,
                       tok.col});
    return code_context ? Operand::code(0) : Operand::imm(0);
  }

  Operand parse_memory(Slot slot, std::size_t index) {
    Operand m;
    m.kind = Operand::Kind::kMem;
    bool first = true;
    while (true) {
      bool neg = false;
      if (!first) {
        if (accept_punct(']')) break;
        if (accept_punct('-')) {
          neg = true;
        } else {
          expect_punct('+');
        }
      } else if (accept_punct('-')) {
        neg = true;
      }
      first = false;
      const Token& tok = next();
      if (tok.kind == Token::Kind::kNumber) {
        Word v = static_cast<Word>(parse_number(tok, line_));
        m.value += neg ? static_cast<Word>(0u - v) : v;
      } else if (tok.kind == Token::Kind::kIdent) {
        if (auto r = parse_reg(tok.text)) {
          if (m.has_base || neg) syntax(tok, "only one added base register is allowed");
          m.has_base = true;
          m.reg = *r;
        } else {
          fixups_.push_back(
              {slot, index, tok.text, RefKind::kDataAddend, neg, line_, tok.col});
        }
      } else {
        syntax(tok, "expected register, number or label in memory operand");
      }
    }
    return m;
  }

  void resolve() {
    for (const Fixup& f : fixups_) {
      auto code_it = module_.code_labels.find(f.label);
      auto data_it = module_.data_labels.find(f.label);
      const bool is_code = code_it != module_.code_labels.end();
      const bool is_data = data_it != module_.data_labels.end();
      const bool ok = f.kind == RefKind::kCode         ? is_code
                      : f.kind == RefKind::kDataAddend ? is_data
                                                       : (is_code || is_data);
      if (!ok) {
        throw ParseError(K::kUnresolvedLabel, f.line, f.col,
                         fmt::format("'{}' is not a {} label", f.label,
                                     f.kind == RefKind::kCode         ? "code"
                                     : f.kind == RefKind::kDataAddend ? "data"
                                                                      : "known"));
      }
      if (f.slot == Slot::kData || f.slot == Slot::kRodata) {
        DataWord& w = (f.slot == Slot::kData ? module_.data : module_.rodata)[f.index];
        if (is_data && f.kind != RefKind::kCode) {
          w = {data_it->second, false};
        } else {
          w = {code_it->second, true};
        }
        continue;
      }
      Operand& op = f.slot == Slot::kA ? module_.code[f.index].a : module_.code[f.index].b;
      switch (f.kind) {
        case RefKind::kCode: op.value = code_it->second; break;
        case RefKind::kDataAddend:
          op.value += f.negate ? static_cast<Word>(0u - data_it->second) : data_it->second;
          break;
        case RefKind::kDataOrCode:
          op = is_data ? Operand::imm(data_it->second) : Operand::code(code_it->second);
          break;
      }
      if (auto err = shape_error(module_.code[f.index])) {
        throw ParseError(K::kOperandShape, f.line, f.col, *err);
      }
    }
  }

  std::string_view text_;
  ModuleImage module_;
  Section section_ = Section::kNone;
  bool open_function_ = false;
  int open_line_ = 0;
  int line_ = 0;
  std::vector<Token> toks_;
  std::size_t at_ = 0;
  std::vector<Fixup> fixups_;
  std::vector<int> inst_lines_;
  std::vector<int> inst_cols_;
};

}  // namespace

ModuleImage parse_module(std::string_view text) { return Parser(text).run(); }

}  // namespace clonematch
