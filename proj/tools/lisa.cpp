#include <iostream>

#include "lisa/cli.hpp"

int main(int argc, char** argv) { return lisa::run_cli(argc, argv, std::cout, std::cerr); }
