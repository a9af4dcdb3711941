#include "cli.hpp"

int main(int argc, char** argv) { return hodmd::run_cli(argc, argv); }
