#include "koopctl/cli.hpp"

int main(int argc, char** argv) { return koopctl::run_cli(argc, argv); }
