#include <iostream>

#include "lowrank/cli.hpp"

int main(int argc, char** argv) { return lowrank::cli::run(argc, argv, std::cout, std::cerr); }
