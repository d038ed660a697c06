#include <iostream>

#include "polarbench/cli.hpp"

int main(int argc, char** argv) {
    return polarbench::run_cli(argc, argv, std::cout, std::cerr);
}
