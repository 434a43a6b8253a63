#include "tmadfrc/cli.hpp"

int main(int argc, char** argv)
{
    return tmadfrc::run_cli(std::vector<std::string>(argv, argv + argc));
}
