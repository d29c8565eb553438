#include "schemacoder/cli.hpp"

int main(int argc, char** argv) {
    return schemacoder::run_cli(argc, argv);
}
