#pragma once

// Occupancy-grid ingestion: PGM I/O with a JSON metadata sidecar, obstacle
// thresholding, exact Euclidean distance transform and disk inflation.
//
// Pixel (col, row) maps to world coordinates
//     x = origin.x + col * resolution,  y = origin.y + row * resolution
// i.e. rows grow along +y. Distances are measured between pixel centres.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auf/core.hpp"

namespace auf {

struct GridGeometry {
    int width = 0;
    int height = 0;
    double resolution = 0.05;  // meters per pixel
    Vec2 origin{};

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }
    [[nodiscard]] std::size_t index(Pixel p) const { return index(p.col, p.row); }
    [[nodiscard]] Pixel pixel_of(std::size_t idx) const {
        return {static_cast<int>(idx % static_cast<std::size_t>(width)),
                static_cast<int>(idx / static_cast<std::size_t>(width))};
    }
    [[nodiscard]] bool contains(int col, int row) const {
        return col >= 0 && row >= 0 && col < width && row < height;
    }
    [[nodiscard]] Vec2 to_world(double col, double row) const {
        return {origin.x + col * resolution, origin.y + row * resolution};
    }
    [[nodiscard]] Vec2 to_world(Pixel p) const { return to_world(p.col, p.row); }
    /// Pixel whose centre is nearest to a world point (may lie outside the grid).
    [[nodiscard]] Pixel to_pixel(Vec2 w) const {
        return {static_cast<int>(std::lround((w.x - origin.x) / resolution)),
                static_cast<int>(std::lround((w.y - origin.y) / resolution))};
    }
    bool operator==(const GridGeometry&) const = default;
};

template <typename T>
struct Raster {
    GridGeometry geom;
    std::vector<T> cells;

    Raster() = default;
    explicit Raster(GridGeometry g, T fill = T{}) : geom(g), cells(g.size(), fill) {}

    [[nodiscard]] int width() const { return geom.width; }
    [[nodiscard]] int height() const { return geom.height; }
    [[nodiscard]] double resolution() const { return geom.resolution; }

    T& at(int col, int row) { return cells[geom.index(col, row)]; }
    const T& at(int col, int row) const { return cells[geom.index(col, row)]; }
    T& at(Pixel p) { return cells[geom.index(p)]; }
    const T& at(Pixel p) const { return cells[geom.index(p)]; }
};

/// Gray values 0..255, row-major.
struct OccupancyGrid : Raster<std::uint8_t> {
    using Raster::Raster;
};

enum class Cell : std::uint8_t { Free = 0, Obstacle = 1 };

struct BinaryGrid : Raster<Cell> {
    using Raster::Raster;

    [[nodiscard]] bool is_free(int col, int row) const {
        return geom.contains(col, row) && at(col, row) == Cell::Free;
    }
    [[nodiscard]] bool is_free(Vec2 w) const {
        const Pixel p = geom.to_pixel(w);
        return is_free(p.col, p.row);
    }
    [[nodiscard]] std::size_t count(Cell c) const {
        return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
    }
};

/// Distance to the nearest obstacle pixel in meters.
struct DistanceImage : Raster<double> {
    using Raster::Raster;
};

struct MapMeta {
    double resolution_m = 0.05;
    double origin_x_m = 0.0;
    double origin_y_m = 0.0;
};

inline constexpr int kDefaultObstacleThreshold = 100;

// ---------------------------------------------------------------------------
// PGM I/O
// ---------------------------------------------------------------------------

namespace detail {

/// Next whitespace-delimited header token, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            if (!tok.empty()) return tok;
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
    const std::string tok = pgm_token(in);
    if (tok.empty()) throw ParseError(std::string("PGM: missing ") + what);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v < 0) throw ParseError("");
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("PGM: bad ") + what + " '" + tok + "'");
    }
}

}  // namespace detail

/// Parse a P2/P5 PGM stream. Geometry metadata comes from `meta`.
inline OccupancyGrid parse_pgm(std::istream& in, const MapMeta& meta = {}) {
    const std::string magic = detail::pgm_token(in);
    if (magic.empty()) throw ParseError("PGM: empty input");
    if (magic != "P2" && magic != "P5") throw ParseError("PGM: bad magic '" + magic + "'");
    const int w = detail::pgm_int(in, "width");
    const int h = detail::pgm_int(in, "height");
    const int maxval = detail::pgm_int(in, "maxval");
    if (w == 0 || h == 0) throw ParseError("PGM: zero dimension");
    if (maxval != 255) throw UnsupportedFormat("PGM: maxval " + std::to_string(maxval) + " != 255");
    if (!(meta.resolution_m > 0.0)) throw ParseError("map resolution must be > 0");

    OccupancyGrid g(GridGeometry{w, h, meta.resolution_m, {meta.origin_x_m, meta.origin_y_m}});
    if (magic == "P5") {
        // pgm_token consumed exactly one whitespace byte after maxval.
        in.read(reinterpret_cast<char*>(g.cells.data()), static_cast<std::streamsize>(g.cells.size()));
        if (static_cast<std::size_t>(in.gcount()) != g.cells.size()) throw ParseError("PGM: truncated raster");
    } else {
        for (auto& c : g.cells) {
            const int v = detail::pgm_int(in, "pixel");
            if (v > 255) throw ParseError("PGM: pixel exceeds maxval");
            c = static_cast<std::uint8_t>(v);
        }
    }
    return g;
}

/// `<dir>/<stem>.meta.json` next to a map file.
inline std::filesystem::path meta_path_for(const std::filesystem::path& map) {
    return map.parent_path() / (map.stem().string() + ".meta.json");
}

inline MapMeta load_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open map metadata " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("map metadata: " + std::string(e.what()));
    }
    MapMeta m;
    m.resolution_m = j.value("resolution_m", m.resolution_m);
    m.origin_x_m = j.value("origin_x_m", m.origin_x_m);
    m.origin_y_m = j.value("origin_y_m", m.origin_y_m);
    if (!(m.resolution_m > 0.0)) throw ParseError("map metadata: resolution_m must be > 0");
    return m;
}

inline void save_meta(const std::filesystem::path& path, const MapMeta& m) {
    nlohmann::ordered_json j;
    j["resolution_m"] = m.resolution_m;
    j["origin_x_m"] = m.origin_x_m;
    j["origin_y_m"] = m.origin_y_m;
    std::ofstream(path) << j.dump(2) << '\n';
}

/// Load a PGM map. Without an explicit `meta`, the sidecar is used when
/// present and defaults otherwise.
inline OccupancyGrid load_grid(const std::filesystem::path& path, std::optional<MapMeta> meta = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open map " + path.string());
    if (!meta) {
        const auto sidecar = meta_path_for(path);
        meta = std::filesystem::exists(sidecar) ? load_meta(sidecar) : MapMeta{};
    }
    return parse_pgm(in, *meta);
}

inline void write_pgm(std::ostream& out, int width, int height, const std::vector<std::uint8_t>& gray) {
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
}

inline void save_grid(const std::filesystem::path& path, const OccupancyGrid& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_pgm(out, g.width(), g.height(), g.cells);
}

inline MapMeta meta_of(const GridGeometry& g) { return {g.resolution, g.origin.x, g.origin.y}; }

/// Free = 255, Obstacle = 0.
inline void save_binary_pgm(const std::filesystem::path& path, const BinaryGrid& g) {
    std::vector<std::uint8_t> gray(g.cells.size());
    std::transform(g.cells.begin(), g.cells.end(), gray.begin(),
                   [](Cell c) { return c == Cell::Free ? std::uint8_t{255} : std::uint8_t{0}; });
    std::ofstream out(path, std::ios::binary);
    write_pgm(out, g.width(), g.height(), gray);
}

/// Linear gray scale, 255 = max distance.
inline void save_distance_pgm(const std::filesystem::path& path, const DistanceImage& d) {
    const double mx = std::max(1e-12, *std::max_element(d.cells.begin(), d.cells.end()));
    std::vector<std::uint8_t> gray(d.cells.size());
    std::transform(d.cells.begin(), d.cells.end(), gray.begin(),
                   [mx](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v / mx)); });
    std::ofstream out(path, std::ios::binary);
    write_pgm(out, d.width(), d.height(), gray);
}

// ---------------------------------------------------------------------------
// Thresholding, distance transform, inflation
// ---------------------------------------------------------------------------

/// Obstacle iff gray < threshold. Thresholds above 255 are clamped.
inline BinaryGrid threshold_obstacles(const OccupancyGrid& grid, int threshold = kDefaultObstacleThreshold) {
    threshold = std::clamp(threshold, 0, 255);
    BinaryGrid out(grid.geom);
    for (std::size_t i = 0; i < grid.cells.size(); ++i)
        out.cells[i] = grid.cells[i] < threshold ? Cell::Obstacle : Cell::Free;
    return out;
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher lower envelope of parabolas over one line of
// squared distances. `f` is read, `d` receives the result.
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        // z[0] = -inf, so the pop loop always stops at k = 0.
        auto meet = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
        double s = meet(v[static_cast<std::size_t>(k)]);
        while (s <= z[static_cast<std::size_t>(k)]) {
            --k;
            s = meet(v[static_cast<std::size_t>(k)]);
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
        const int p = v[static_cast<std::size_t>(j)];
        d[q] = double(q - p) * (q - p) + f[p];
    }
}

/// Squared Euclidean distance (pixel units) to the nearest Obstacle pixel.
inline std::vector<double> squared_edt(const BinaryGrid& grid) {
    const int w = grid.width();
    const int h = grid.height();
    std::vector<double> sq(grid.cells.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = grid.cells[i] == Cell::Obstacle ? 0.0 : kInf;

    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> in(static_cast<std::size_t>(std::max(w, h)));
    std::vector<double> out(in.size());
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) in[static_cast<std::size_t>(r)] = sq[grid.geom.index(c, r)];
        edt_1d(in.data(), out.data(), h, v, z);
        for (int r = 0; r < h; ++r) sq[grid.geom.index(c, r)] = out[static_cast<std::size_t>(r)];
    }
    for (int r = 0; r < h; ++r) {
        double* row = sq.data() + grid.geom.index(0, r);
        std::copy(row, row + w, in.begin());
        edt_1d(in.data(), row, w, v, z);
    }
    return sq;
}

}  // namespace detail

/// Exact Euclidean distance transform in meters.
inline DistanceImage distance_transform(const BinaryGrid& grid) {
    if (grid.count(Cell::Obstacle) == 0)
        throw AllFreeError("distance transform needs at least one obstacle pixel");
    const auto sq = detail::squared_edt(grid);
    DistanceImage d(grid.geom);
    for (std::size_t i = 0; i < sq.size(); ++i) d.cells[i] = std::sqrt(sq[i]) * grid.resolution();
    return d;
}

/// Grow obstacles by an exact Euclidean disk of `robot_radius` meters.
inline BinaryGrid inflate_obstacles(const BinaryGrid& grid, double robot_radius) {
    if (robot_radius < 0.0) throw Error("robot radius must be >= 0");
    if (robot_radius == 0.0 || grid.count(Cell::Obstacle) == 0) return grid;
    const auto sq = detail::squared_edt(grid);
    const double r_px = robot_radius / grid.resolution();
    const double limit = r_px * r_px * (1.0 + 1e-12) + 1e-12;
    BinaryGrid out(grid.geom);
    for (std::size_t i = 0; i < sq.size(); ++i) out.cells[i] = sq[i] <= limit ? Cell::Obstacle : Cell::Free;
    return out;
}

}  // namespace auf
