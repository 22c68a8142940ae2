#include "dressing/cli.hpp"

int main(int argc, char** argv) { return dressing::cli_main(argc, argv); }
