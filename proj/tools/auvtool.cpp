#include <iostream>

#include "auv/commands.hpp"

int main(int argc, char** argv) {
    return auv::cli::run(argc, argv, std::cout, std::cerr);
}
