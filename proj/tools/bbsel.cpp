#include <iostream>

#include "bbsel/cli.hpp"

int main(int argc, char** argv) { return bbsel::cli::run(argc, argv, std::cout, std::cerr); }
