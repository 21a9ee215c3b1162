#include <iostream>

#include "varreg/cli/experiment.hpp"

int main(int argc, char** argv) { return varreg::cli::run_cli(argc, argv, std::cout, std::cerr); }
