#include <iostream>

#include "lensdff/cli.hpp"

int main(int argc, char** argv) { return lensdff::run_cli(argc, argv, std::cout, std::cerr); }
