#include "plpde_cli/commands.hpp"

int main(int argc, char** argv) { return plpde::cli::run(argc, argv); }
