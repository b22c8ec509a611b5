#include "memda/cli.hpp"

int main(int argc, char** argv) { return memda::cli_main(argc, argv); }
