#include <iostream>

#include "epplan/cli.hpp"

int main(int argc, char** argv) { return epplan::run_cli(argc, argv, std::cout, std::cerr); }
