#include <iostream>

#include "edgesim/cli.hpp"

int main(int argc, char** argv) { return edgesim::cli::run(argc, argv, std::cout, std::cerr); }
