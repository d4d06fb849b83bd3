#include <iostream>

#include "bpl/cli.hpp"

int main(int argc, char** argv) { return bpl::run_cli(argc, argv, std::cout, std::cerr); }
