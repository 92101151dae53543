#include "ghostdiff/cli.hpp"

int main(int argc, char** argv) { return gd::cli::cli_main(argc, argv); }
