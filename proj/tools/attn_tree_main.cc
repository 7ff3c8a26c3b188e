#include <iostream>
#include <string>
#include <vector>

#include "attn_tree/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return attn_tree::cli::run(args, std::cout, std::cerr);
}
