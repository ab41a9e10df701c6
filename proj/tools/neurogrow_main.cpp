#include <string>
#include <vector>

#include "neurogrow/cli.hpp"

int main(int argc, char** argv) {
    return neurogrow::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
