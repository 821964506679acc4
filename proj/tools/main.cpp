#include "swarmwatch/cli.hpp"

int main(int argc, char** argv) {
    return swarmwatch::cli::run(argc, argv);
}
