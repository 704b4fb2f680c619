#include "palf/cli.hpp"

int main(int argc, char** argv) { return palf::run_cli(argc, argv); }
