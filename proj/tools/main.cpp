#include <iostream>
#include <string>
#include <vector>

#include "mindscope/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return mindscope::cli::dispatch(args, std::cout, std::cerr);
}
