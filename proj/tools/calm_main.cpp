#include <string>
#include <vector>

#include "calm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return calm::cli::run(args);
}
