#include "cli.hpp"

int main(int argc, char* argv[]) { return ote::cli::dispatch(argc, argv); }
