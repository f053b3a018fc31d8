#include <iostream>

#include "pci/cli.hpp"

int main(int argc, char** argv) { return pci::run_cli(argc, argv, std::cout, std::cerr); }
