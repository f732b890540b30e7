#include "ssc/cli.hpp"

int main(int argc, char** argv) { return ssc::run_cli(argc, argv); }
