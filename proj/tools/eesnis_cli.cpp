#include "eesnis/cli.hpp"

int main(int argc, char** argv) { return eesnis::harness::cli_run(argc, argv); }
