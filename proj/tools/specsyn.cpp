#include "specsyn/cli.hpp"

int main(int argc, char** argv) { return specsyn::cli::run(argc, argv); }
