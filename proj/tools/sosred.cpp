#include <sosred/cli.hpp>

int main(int argc, char** argv) { return sosred::cli::run(argc, argv); }
