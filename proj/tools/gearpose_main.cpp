#include "gearpose/cli.hpp"

int main(int argc, char** argv) { return gearpose::run_cli(argc, argv); }
