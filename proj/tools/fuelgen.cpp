#include <iostream>

#include "fuelgen/cli.hpp"

int main(int argc, char** argv) { return fuelgen::run_cli(argc, argv, std::cout, std::cerr); }
