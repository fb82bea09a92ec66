#include "mvsens/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mvsens::cli::run(argc, argv, std::cout, std::cerr); }
