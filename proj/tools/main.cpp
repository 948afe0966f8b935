#include "cli.hpp"

int main(int argc, char** argv) { return sbgam::cli::run_cli(argc, argv); }
