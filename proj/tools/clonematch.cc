#include <iostream>
#include <string>
#include <vector>

#include "clonematch/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return clonematch::dispatch(args, std::cout, std::cerr);
}
