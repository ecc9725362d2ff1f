#include "nnloc/cli.hpp"

int main(int argc, char** argv) { return nnloc::run_cli(argc, argv); }
