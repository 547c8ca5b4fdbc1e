#include <iostream>

#include "braingraph/cli/app.hpp"

int main(int argc, char** argv) {
  return braingraph::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
