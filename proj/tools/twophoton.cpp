// twophoton.cpp: Command-line entry point

#include <iostream>

#include "twophoton/cli.hpp"

int main(int argc, char** argv) { return twophoton::cli::run(argc, argv, std::cout, std::cerr); }
