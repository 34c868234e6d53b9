// Writes the synthetic fixture floors as PGM maps with metadata sidecars.

#include <filesystem>
#include <iostream>

#include "auf/fixtures.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path dir = argc > 1 ? argv[1] : "fixtures";
    try {
        fs::create_directories(dir);
        for (auto name : auf::fixtures::kNames) {
            const auto grid = auf::fixtures::by_name(name);
            const fs::path pgm = dir / (std::string(name) + ".pgm");
            auf::save_grid(pgm, grid);
            auf::save_meta(auf::meta_path_for(pgm), auf::meta_of(grid.geom));
            std::cout << pgm.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
