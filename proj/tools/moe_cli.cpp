#include "moe/cli.hpp"

int main(int argc, char** argv) { return moe::cli::parse_and_dispatch(argc, argv); }
