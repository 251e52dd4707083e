#include "sddflow/cli.hpp"

int main(int argc, char** argv) { return sddflow::run_cli(argc, argv); }
