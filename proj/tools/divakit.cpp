#include "divakit/cli.hpp"

int main(int argc, char** argv) { return divakit::cli::main(argc, argv); }
