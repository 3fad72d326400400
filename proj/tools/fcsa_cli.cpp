#include "fcsa/cli.hpp"

int main(int argc, char** argv) { return fcsa::cli::dispatch(argc, argv); }
