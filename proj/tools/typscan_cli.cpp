#include "typscan/experiments.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return typscan::experiments::run_cli(argc, argv, std::cout, std::cerr);
}
