#include "grounding/cli.hpp"

int main(int argc, char** argv) { return grounding::cli_main(argc, argv); }
