#include "lrd/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return lrd::run_cli(argc, argv, std::cout, std::cerr);
}
