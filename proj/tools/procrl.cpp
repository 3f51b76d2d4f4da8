#include <iostream>
#include <string>
#include <vector>

#include "procrl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return procrl::run_cli(args, std::cout, std::cerr);
}
