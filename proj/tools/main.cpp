#include "evrf/cli.hpp"

int main(int argc, char** argv) { return evrf::run_cli(argc, argv); }
