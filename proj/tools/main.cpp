#include "ontofuse/cli.hpp"

int main(int argc, char** argv) { return ontofuse::run_cli(argc, argv); }
