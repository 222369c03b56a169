#include "sdrem/cli.hpp"

int main(int argc, char** argv) { return sdrem::run_cli(argc, argv); }
