#include "agridrive/cli.hpp"

int main(int argc, char** argv) { return agridrive::run_cli(argc, argv); }
