#include "cli/commands.hpp"

int main(int argc, char** argv) { return templar::cli::run(argc, argv); }
