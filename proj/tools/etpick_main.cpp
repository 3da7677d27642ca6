#include "etpick/cli.hpp"

int main(int argc, char** argv) { return etpick::run_cli(argc, argv); }
