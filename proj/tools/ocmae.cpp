#include <iostream>

#include "ocmae/cli.hpp"

int main(int argc, char** argv) { return ocmae::cli::run(argc, argv, std::cout, std::cerr); }
