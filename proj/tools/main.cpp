#include "cli.hpp"

int main(int argc, char** argv) { return adacon::cli::dispatch(argc, argv); }
