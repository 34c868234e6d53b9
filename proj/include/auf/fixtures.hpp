#pragma once

// Synthetic floor plans used by the tests, the demo and the benchmarks.
// Gray 255 = free, 0 = wall.

#include <string_view>

#include "auf/gridmap.hpp"

namespace auf::fixtures {

inline constexpr double kResolution = 0.05;

class FloorSketch {
public:
    FloorSketch(double width_m, double height_m, double res = kResolution)
        : grid_(GridGeometry{static_cast<int>(std::lround(width_m / res)),
                             static_cast<int>(std::lround(height_m / res)), res, {}},
                255) {}

    /// Fill the half-open world rectangle [x0, x1) x [y0, y1).
    FloorSketch& fill(double x0, double y0, double x1, double y1, std::uint8_t gray = 0) {
        const double res = grid_.resolution();
        const int c0 = std::max(0, static_cast<int>(std::lround(x0 / res)));
        const int r0 = std::max(0, static_cast<int>(std::lround(y0 / res)));
        const int c1 = std::min(grid_.width(), static_cast<int>(std::lround(x1 / res)));
        const int r1 = std::min(grid_.height(), static_cast<int>(std::lround(y1 / res)));
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) grid_.at(c, r) = gray;
        return *this;
    }
    FloorSketch& wall(double x0, double y0, double x1, double y1) { return fill(x0, y0, x1, y1, 0); }
    FloorSketch& clear(double x0, double y0, double x1, double y1) { return fill(x0, y0, x1, y1, 255); }

    FloorSketch& border(double t) {
        const double w = grid_.width() * grid_.resolution();
        const double h = grid_.height() * grid_.resolution();
        wall(0, 0, w, t).wall(0, h - t, w, h).wall(0, 0, t, h).wall(w - t, 0, w, h);
        return *this;
    }

    [[nodiscard]] OccupancyGrid grid() const { return grid_; }

private:
    OccupancyGrid grid_;
};

/// Single rectangular room; 8.4 m x 8.4 m interior, i.e. 8 m x 8 m free
/// after a 0.2 m robot inflation.
inline OccupancyGrid room() {
    return FloorSketch(8.4 + 0.4, 8.4 + 0.4).border(0.2).grid();
}

/// Two crossing corridors: a 2 m wide east-west corridor and a 4 m wide
/// north-south corridor on a 20 m x 20 m floor.
inline OccupancyGrid plus() {
    FloorSketch s(20.0, 20.0);
    s.fill(0, 0, 20, 20, 0);
    s.clear(0.2, 9.0, 19.8, 11.0);
    s.clear(8.0, 0.2, 12.0, 19.8);
    return s.grid();
}

/// Multi-room office floor: east-west corridor, three rooms north of it, two
/// rooms south of it, 1 m doors.
inline OccupancyGrid floor3_like() {
    FloorSketch s(32.0, 16.0);
    s.border(0.2);
    // corridor walls
    s.wall(0.2, 6.6, 31.8, 6.8).wall(0.2, 9.2, 31.8, 9.4);
    // north rooms
    s.wall(10.6, 0.2, 10.8, 6.6).wall(21.2, 0.2, 21.4, 6.6);
    // south rooms
    s.wall(16.0, 9.4, 16.2, 15.8);
    // doors
    s.clear(4.8, 6.6, 5.8, 6.8).clear(15.4, 6.6, 16.4, 6.8).clear(26.0, 6.6, 27.0, 6.8);
    s.clear(7.4, 9.2, 8.4, 9.4).clear(23.4, 9.2, 24.4, 9.4);
    return s.grid();
}

inline OccupancyGrid by_name(std::string_view name) {
    if (name == "room") return room();
    if (name == "plus") return plus();
    if (name == "floor3-like") return floor3_like();
    throw Error("unknown fixture '" + std::string(name) + "'");
}

inline constexpr std::string_view kNames[] = {"room", "plus", "floor3-like"};

}  // namespace auf::fixtures
