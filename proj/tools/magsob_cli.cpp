#include "magsob/cli.hpp"

int main(int argc, char** argv) { return magsob::cli::run(argc, argv); }
