#pragma once

// Relocatable module form: code addresses become label references so that
// passes can insert, delete and move instructions freely.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clonematch/program.h"

namespace clonematch {

struct EditItem {
  std::vector<std::string> labels;  // labels defined at this instruction
  Instruction inst;
  std::string ref;                  // label of the code operand, if any
};

struct EditFunction {
  std::optional<std::string> name;
  std::vector<EditItem> items;  // the first item carries the entry labels
};

struct EditData {
  Word value = 0;
  std::string ref;  // code-address literal
};

struct EditModule {
  std::vector<EditData> data;
  std::vector<EditData> rodata;
  std::map<std::string, Word> data_labels;
  std::vector<EditFunction> functions;
  int label_counter = 0;

  // Synthesized labels start with ".L" and are not exported.
  std::string fresh_label();
};

using Block = std::vector<EditItem>;

EditModule to_editable(const ModuleImage& m);
// Lays out and validates. Throws ParseError when a pass produced an invalid
// module.
ModuleImage from_editable(const EditModule& em);

// Splits at labelled instructions and after block-ending instructions.
std::vector<Block> split_blocks(const EditFunction& fn);
std::vector<EditItem> join_blocks(std::vector<Block> blocks);

// Control may continue into the next instruction after the block.
bool falls_through(const Block& b);
// The block's conditional jump tests a condition set in an earlier block.
bool condition_live_in(const Block& b);
// The last block falls through past the end of the function.
bool falls_off_end(const EditFunction& fn);

EditItem make_item(Opcode op, Operand a = Operand::none(), Operand b = Operand::none());
EditItem make_jump(Opcode op, std::string label);

}  // namespace clonematch
