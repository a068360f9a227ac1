#include "qig/cli.hpp"

int main(int argc, char** argv) { return qig::cli::run(argc, argv); }
