#include "cli.hpp"

int main(int argc, char** argv) { return ymap::cli::run(argc, argv); }
