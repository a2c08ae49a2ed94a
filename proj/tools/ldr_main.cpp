#include "ldr/cli.hpp"

int main(int argc, char** argv) { return ldr::cli_main(argc, argv); }
