#include "coref/cli.hpp"

int main(int argc, char** argv) { return coref::run_cli(argc, argv); }
