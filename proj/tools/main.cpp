#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) { return wsda::cli::run(argc, argv, std::cout, std::cerr); }
