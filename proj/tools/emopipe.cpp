#include <iostream>

#include "emopipe/cli.hpp"

int main(int argc, char** argv) { return emopipe::cli::run(argc, argv, std::cout, std::cerr); }
