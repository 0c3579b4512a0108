#include "fbwm/cli/cli.hpp"

int main(int argc, char** argv)
{
    return fbwm::cli::run_cli(argc, argv);
}
