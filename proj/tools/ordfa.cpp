#include "ordfa/cli.hpp"

int main(int argc, char** argv) { return ordfa::cli_main(argc, argv); }
