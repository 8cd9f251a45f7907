#include <iostream>
#include <string>
#include <vector>

#include "oswitch/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return oswitch::run_cli(args, std::cout, std::cerr);
}
