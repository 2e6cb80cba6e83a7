#include <iostream>

#include "stnas/cli.hpp"

int main(int argc, char** argv) { return stnas::run_cli(argc, argv, std::cout, std::cerr); }
