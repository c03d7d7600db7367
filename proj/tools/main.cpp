#include <iostream>

#include "bgmm/cli.hpp"

int main(int argc, char** argv) { return bgmm::run_cli(argc, argv, std::cout, std::cerr); }
