#include <iostream>
#include <string>
#include <vector>

#include "ctxlm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ctxlm::run_cli(args, std::cout, std::cerr);
}
