#include "turtle/cli.hpp"

int main(int argc, char** argv) { return turtle::cli::dispatch(argc, argv); }
