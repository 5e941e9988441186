#include "dpf/cli.hpp"

int main(int argc, char** argv) { return dpf::cli::main_entry(argc, argv); }
