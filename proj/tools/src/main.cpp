#include <iostream>
#include <string>
#include <vector>

#include "tcdc/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tcdc::cli::run(args, std::cout, std::cerr);
}
