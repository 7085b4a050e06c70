#include <iostream>

#include "vaxcov/cli.hpp"

int main(int argc, char** argv) { return vaxcov::cli::run(argc, argv, std::cout, std::cerr); }
