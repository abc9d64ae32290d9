#include "fenet/cli.hpp"

int main(int argc, char** argv) { return fenet::cli::run(argc, argv); }
