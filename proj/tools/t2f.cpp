#include <iostream>

#include "t2f/cli/app.hpp"

int main(int argc, char** argv) { return t2f::cli::run(argc, argv, std::cout, std::cerr); }
