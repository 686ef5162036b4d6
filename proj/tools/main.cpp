#include "slimkit/runner.hpp"

int main(int argc, char** argv) { return slimkit::cli_main(argc, argv); }
