#include "eobs/cli.hpp"

int main(int argc, char** argv) { return eobs::run_cli(argc, argv); }
