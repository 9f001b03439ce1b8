#include "fernseg_cli.hpp"

int main(int argc, char** argv) { return fernseg::cli::run(argc, argv); }
