#include <qotto/cli_runner.hpp>

int main(int argc, char** argv) { return qotto::cli_main(argc, argv); }
