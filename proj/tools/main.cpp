#include "hetss/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hetss::cli::run(argc, argv, std::cout, std::cerr); }
