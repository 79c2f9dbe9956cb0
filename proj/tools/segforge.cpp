#include <iostream>

#include "segforge/cli.hpp"

int main(int argc, char** argv) { return segforge::cli::run(argc, argv, std::cout, std::cerr); }
