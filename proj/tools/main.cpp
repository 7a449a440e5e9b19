#include <vector>

#include "orbitshift/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return orbitshift::cli::run(args);
}
