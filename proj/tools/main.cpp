#include <string>
#include <vector>

#include "wmhseg/cli.hpp"

int main(int argc, char** argv) {
    return wmhseg::run_cli(std::vector<std::string>(argv, argv + argc));
}
