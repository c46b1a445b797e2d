#include "narrative/cli.hpp"

int main(int argc, char** argv) { return narrative::cli::run({argv + 1, argv + argc}); }
