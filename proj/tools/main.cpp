#include <iostream>

#include "resint/cli.hpp"

int main(int argc, char** argv) {
    return resint::run_cli(argc, argv, std::cout, std::cerr);
}
