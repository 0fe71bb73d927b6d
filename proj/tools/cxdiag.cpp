#include <iostream>
#include <string>
#include <vector>

#include "cxdiag/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cxdiag::cli::run(args, std::cout, std::cerr);
}
