#include "pdrci/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pdrci::cli::run(argc, argv, std::cout, std::cerr); }
