#include <iostream>

#include "sktod/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sktod::cli::run(args, std::cout, std::cerr);
}
