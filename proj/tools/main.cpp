#include <iostream>

#include "ctd3/cli.hpp"

int main(int argc, char** argv) { return ctd3::cli_main(argc, argv, std::cout, std::cerr); }
