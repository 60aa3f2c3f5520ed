#include "pfilter/cli.hpp"

int main(int argc, char** argv) { return pfilter::cli::run_main(argc, argv); }
