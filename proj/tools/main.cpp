#include <iostream>

#include "sband/cli.hpp"

int main(int argc, char** argv) { return sband::cli::run(argc, argv, std::cout, std::cerr); }
