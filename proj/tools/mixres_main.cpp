#include "mixres/cli/commands.hpp"

int main(int argc, char** argv) { return mixres::cli::run_main(argc, argv); }
