#include "wta/cli.hpp"

int main(int argc, char** argv) { return wta::cli::run(argc, argv); }
