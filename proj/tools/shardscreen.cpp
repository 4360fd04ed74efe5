#include "shardscreen/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return shardscreen::run_cli(argc, argv, std::cout, std::cerr);
}
