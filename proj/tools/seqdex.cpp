#include <iostream>

#include "seqdex/cli.hpp"

int main(int argc, char** argv) { return seqdex::cli::run(argc, argv, std::cout, std::cerr); }
