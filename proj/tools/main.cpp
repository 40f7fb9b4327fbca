#include "hsnd/cli.hpp"

int main(int argc, char** argv) { return hsnd::run_cli(argc, argv); }
