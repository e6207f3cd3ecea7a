#include <iostream>
#include <string>
#include <vector>

#include "adasf/cli.hpp"

int main(int argc, char** argv) {
  return adasf::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
