#include <iostream>

#include "mimc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mimc::run_cli(args, std::cout, std::cerr);
}
