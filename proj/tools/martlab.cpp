#include <iostream>

#include "martlab/cli.hpp"

int main(int argc, char** argv) {
  return martlab::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
