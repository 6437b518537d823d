#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return qkdlab::cli::run(argc, argv, std::cout, std::cerr); }
