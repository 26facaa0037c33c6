#include "npeb/cli.hpp"

int main(int argc, char** argv) { return npeb::run_cli(argc, argv); }
