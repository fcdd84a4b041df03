#include <iostream>

#include "lnlab/cli.hpp"

int main(int argc, char** argv) { return lnlab::cli_main(argc, argv, std::cout, std::cerr); }
