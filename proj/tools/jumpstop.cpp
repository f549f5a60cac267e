#include <iostream>

#include "jumpstop/commands.hpp"

int main(int argc, char** argv) {
  return jumpstop::run_cli(argc, argv, std::cout, std::cerr);
}
