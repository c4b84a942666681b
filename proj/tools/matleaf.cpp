#include "matleaf/cli.hpp"

int main(int argc, char** argv) { return matleaf::cli::run(argc, argv, std::cout, std::cerr); }
