#include "sdcaudit_cli.hpp"

int main(int argc, char** argv) { return sdcaudit::cli::cli_main(argc, argv); }
