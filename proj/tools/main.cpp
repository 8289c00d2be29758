#include <string>
#include <vector>

#include "coastcast/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return coastcast::run_cli(args);
}
