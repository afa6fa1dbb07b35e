#include <mqtc/cli.hpp>

int main(int argc, char** argv) { return mqtc::cli_main(argc, argv); }
