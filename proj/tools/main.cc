#include <iostream>
#include <string>
#include <vector>

#include "srse/cli.h"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return srse::RunCli(args, std::cout, std::cerr);
}
