#include <iostream>

#include "slip/commands.hpp"

int main(int argc, char** argv) { return slip::run_cli(argc, argv, std::cout, std::cerr); }
