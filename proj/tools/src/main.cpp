#include "hicov_cli/cli.hpp"

int main(int argc, char** argv) { return hicov::cli::run_cli(argc, argv); }
