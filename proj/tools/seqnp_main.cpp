#include "seqnp/cli.hpp"

int main(int argc, char** argv) { return seqnp::cli::run(argc, argv); }
