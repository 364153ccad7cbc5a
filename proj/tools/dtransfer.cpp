#include "depthtransfer/cli.hpp"

int main(int argc, char** argv) { return dt::run_cli(argc, argv); }
