#include "teamsort/cli.hpp"

int main(int argc, char** argv) { return teamsort::cli::run(argc, argv); }
