#include <iostream>
#include <string>
#include <vector>

#include "nuts_gauss/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nuts_gauss::run_cli(args, std::cout, std::cerr);
}
