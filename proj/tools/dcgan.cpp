#include <iostream>
#include <string>
#include <vector>

#include "dcgan/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dcgan::run_cli(args, std::cout, std::cerr);
}
