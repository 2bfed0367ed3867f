#include "fockforge/cli.hpp"

int main(int argc, char** argv) { return fockforge::run_cli(argc, argv); }
