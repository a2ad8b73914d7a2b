#include "rankcop/cli.hpp"

int main(int argc, char** argv) { return rankcop::cli::run(argc, argv); }
