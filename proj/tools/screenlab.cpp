#include "screenlab/cli.hpp"

int main(int argc, char** argv) { return screenlab::cli::run(argc, argv); }
