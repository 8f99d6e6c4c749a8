#include <iostream>
#include <string>
#include <vector>

#include "emergent/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return emergent::run_cli(args, std::cout, std::cerr);
}
