#include "stochint/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return stochint::run_cli(argc, argv, std::cout, std::cerr); }
