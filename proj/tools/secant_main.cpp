#include "secant/cli/app.hpp"

int main(int argc, char** argv) { return secant::cli::run_cli(argc, argv); }
