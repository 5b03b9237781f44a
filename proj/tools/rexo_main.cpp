#include "rexo/cli.hpp"

int main(int argc, char** argv) { return rexo::cli::main_cli(argc, argv); }
