#include "cli.hpp"

int main(int argc, char **argv) {
    return aoi_copilot::cli::main_entry(std::vector<std::string>(argv + 1, argv + argc));
}
