#include "cli/commands.hpp"

int main(int argc, char** argv) { return embstats::cli::run(argc, argv); }
