#include "xdomid/cli.hpp"

int main(int argc, char** argv) { return xdomid::run_cli(argc, argv); }
