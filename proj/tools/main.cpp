#include "swreg/cli.hpp"

int main(int argc, char** argv) { return swreg::cli::run(argc, argv); }
