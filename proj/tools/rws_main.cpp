#include "rws/cli.hpp"

int main(int argc, char** argv) { return rws::cli_main(argc, argv); }
