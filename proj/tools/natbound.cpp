#include <iostream>
#include <string>
#include <vector>

#include "natbound/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return natbound::cli::run(args, std::cout, std::cerr);
}
