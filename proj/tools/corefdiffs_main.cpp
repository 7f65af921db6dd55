#include "corefdiffs/cli.hpp"

int main(int argc, char** argv) { return corefdiffs::cli::run(argc, argv); }
