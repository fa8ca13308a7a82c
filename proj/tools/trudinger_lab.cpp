#include "trudinger/cli.hpp"

int main(int argc, char** argv) { return trudinger::cli::main(argc, argv); }
