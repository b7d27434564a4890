#include "sonar/cli/cli.hpp"

int main(int argc, char** argv) { return sonar::cli::run_cli(argc, argv); }
