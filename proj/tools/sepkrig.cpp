#include <iostream>
#include <string>
#include <vector>

#include "sepkrig/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sepkrig::cli::run_command(std::move(args), std::cout, std::cerr);
}
