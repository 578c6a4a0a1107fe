#include "alip/cli.hpp"

int main(int argc, char** argv) { return alip::cli_main(argc, argv); }
