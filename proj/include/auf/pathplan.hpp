#pragma once

// Survey planning: per-region principal axes from the pixel covariance, the
// covering rectangle in the principal frame, a cell tiling of that rectangle
// and a boustrophedon ordering of the cell centres.

#include <algorithm>
#include <vector>

#include "auf/segmentation.hpp"

namespace auf {

inline constexpr double kDefaultCellSize = 0.8;

struct PrincipalAxes {
    Vec2 a1{1.0, 0.0};  // sweep direction (larger eigenvalue)
    Vec2 a2{0.0, 1.0};
    double lambda1 = 0.0;  // px^2
    double lambda2 = 0.0;
};

/// Covering rectangle of a region, in pixel units of the principal frame
/// u = a1 . p, v = a2 . p where p = (col, row). Bounds include the pixel
/// footprint (+-0.5 px).
struct RectInFPrime {
    PrincipalAxes axes;
    double u_min = 0.0, u_max = 0.0;
    double v_min = 0.0, v_max = 0.0;

    [[nodiscard]] double length_u() const { return u_max - u_min; }
    [[nodiscard]] double length_v() const { return v_max - v_min; }
    /// Back to pixel coordinates (col, row), fractional.
    [[nodiscard]] Vec2 to_pixel_coords(double u, double v) const { return axes.a1 * u + axes.a2 * v; }
};

struct Waypoint {
    int region_id = 0;
    Vec2 pos{};           // world meters
    double heading = 0.0; // radians, direction of travel when leaving this point
    int row = 0;          // sweep row within its region (one leg per row)
};

struct RegionPlan {
    int region_id = 0;
    PrincipalAxes axes;
    std::vector<Waypoint> waypoints;
};

struct SurveyPlan {
    double cell_size = kDefaultCellSize;
    Vec2 start{};
    std::vector<RegionPlan> regions;  // in visit order

    [[nodiscard]] std::vector<Waypoint> flatten() const {
        std::vector<Waypoint> out;
        for (const auto& r : regions) out.insert(out.end(), r.waypoints.begin(), r.waypoints.end());
        return out;
    }
    [[nodiscard]] std::size_t size() const {
        std::size_t n = 0;
        for (const auto& r : regions) n += r.waypoints.size();
        return n;
    }
};

/// Eigen-decomposition of the (population) covariance of pixel coordinates.
/// Sign convention: a1.x > 0, or a1.x == 0 and a1.y > 0; a2 is a1 rotated by
/// +90 degrees. Equal eigenvalues give a1 = (1, 0).
inline PrincipalAxes principal_axes(const std::vector<Pixel>& pixels) {
    if (pixels.size() < 2) throw DegenerateRegion("principal axes need at least 2 pixels");
    const double n = static_cast<double>(pixels.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : pixels) {
        mx += p.col;
        my += p.row;
    }
    mx /= n;
    my /= n;
    double cxx = 0.0, cxy = 0.0, cyy = 0.0;
    for (const auto& p : pixels) {
        const double dx = p.col - mx;
        const double dy = p.row - my;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    cxx /= n;
    cxy /= n;
    cyy /= n;

    PrincipalAxes ax;
    const double mean = 0.5 * (cxx + cyy);
    const double half = 0.5 * (cxx - cyy);
    const double disc = std::sqrt(half * half + cxy * cxy);
    ax.lambda1 = mean + disc;
    ax.lambda2 = std::max(0.0, mean - disc);
    const double scale = std::max(1e-300, std::abs(cxx) + std::abs(cyy));
    if (disc <= 1e-12 * scale) {
        ax.a1 = {1.0, 0.0};
    } else if (std::abs(cxy) <= 1e-14 * scale) {
        ax.a1 = cxx >= cyy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    } else {
        // (lambda1 - cyy, cxy) and (cxy, lambda1 - cxx) are both eigenvectors;
        // take the better conditioned one.
        Vec2 e1{ax.lambda1 - cyy, cxy};
        Vec2 e2{cxy, ax.lambda1 - cxx};
        Vec2 e = e1.norm() >= e2.norm() ? e1 : e2;
        ax.a1 = e * (1.0 / e.norm());
    }
    if (ax.a1.x < 0.0 || (ax.a1.x == 0.0 && ax.a1.y < 0.0)) ax.a1 = ax.a1 * -1.0;
    ax.a2 = {-ax.a1.y, ax.a1.x};
    return ax;
}

inline PrincipalAxes principal_axes(const Region& region) { return principal_axes(region.pixels); }

inline RectInFPrime bounding_rectangle(const std::vector<Pixel>& pixels, const PrincipalAxes& axes) {
    RectInFPrime rect{axes,
                      std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : pixels) {
        const Vec2 pc{static_cast<double>(p.col), static_cast<double>(p.row)};
        const double u = axes.a1.dot(pc);
        const double v = axes.a2.dot(pc);
        rect.u_min = std::min(rect.u_min, u);
        rect.u_max = std::max(rect.u_max, u);
        rect.v_min = std::min(rect.v_min, v);
        rect.v_max = std::max(rect.v_max, v);
    }
    rect.u_min -= 0.5;
    rect.u_max += 0.5;
    rect.v_min -= 0.5;
    rect.v_max += 0.5;
    return rect;
}

inline RectInFPrime bounding_rectangle(const Region& region, const PrincipalAxes& axes) {
    return bounding_rectangle(region.pixels, axes);
}

enum class SweepAxis { Principal, Secondary };

/// Tile the rectangle with `cell_size` cells (centred on the rectangle),
/// keep cell centres whose pixel belongs to the region, and order them in
/// boustrophedon rows running along the sweep axis.
inline std::vector<Waypoint> grid_waypoints(const RectInFPrime& rect, const Region& region, const SegmentedMap& seg,
                                            double cell_size = kDefaultCellSize,
                                            SweepAxis sweep = SweepAxis::Principal) {
    if (!(cell_size > 0.0)) throw Error("cell size must be > 0");
    const GridGeometry& g = seg.geom;
    const double cs = cell_size / g.resolution;
    auto cells_along = [cs](double len) { return std::max(1, static_cast<int>(std::ceil(len / cs - 1e-9))); };
    const int nu = cells_along(rect.length_u());
    const int nv = cells_along(rect.length_v());
    const double u0 = 0.5 * (rect.u_min + rect.u_max) - 0.5 * nu * cs;
    const double v0 = 0.5 * (rect.v_min + rect.v_max) - 0.5 * nv * cs;

    const bool along_u = sweep == SweepAxis::Principal;
    const int rows = along_u ? nv : nu;
    const int cols = along_u ? nu : nv;

    std::vector<Waypoint> out;
    int leg = 0;
    for (int j = 0; j < rows; ++j) {
        bool any = false;
        for (int k = 0; k < cols; ++k) {
            const int i = (leg % 2 == 0) ? k : cols - 1 - k;
            const int iu = along_u ? i : j;
            const int iv = along_u ? j : i;
            const double u = u0 + (iu + 0.5) * cs;
            const double v = v0 + (iv + 0.5) * cs;
            const Vec2 pc = rect.to_pixel_coords(u, v);
            const Pixel px{static_cast<int>(std::lround(pc.x)), static_cast<int>(std::lround(pc.y))};
            if (!g.contains(px.col, px.row) || seg.labels.at(px) != region.id) continue;
            out.push_back({region.id, g.to_world(pc.x, pc.y), 0.0, leg});
            any = true;
        }
        if (any) ++leg;
    }

    const Vec2 sweep_dir = along_u ? rect.axes.a1 : rect.axes.a2;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (k + 1 < out.size()) {
            const Vec2 d = out[k + 1].pos - out[k].pos;
            out[k].heading = std::atan2(d.y, d.x);
        } else if (k > 0) {
            out[k].heading = out[k - 1].heading;
        } else {
            out[k].heading = std::atan2(sweep_dir.y, sweep_dir.x);
        }
    }
    return out;
}

/// Heading changes larger than `tol` radians along a waypoint sequence.
inline int count_turns(const std::vector<Waypoint>& wps, double tol = 1e-6) {
    int turns = 0;
    for (std::size_t k = 1; k + 1 < wps.size(); ++k) {
        const Vec2 a = wps[k].pos - wps[k - 1].pos;
        const Vec2 b = wps[k + 1].pos - wps[k].pos;
        const double ang = std::abs(std::remainder(std::atan2(b.y, b.x) - std::atan2(a.y, a.x), 2.0 * std::numbers::pi));
        if (ang > tol) ++turns;
    }
    return turns;
}

/// Greedy region order: from `from`, repeatedly visit the unvisited region
/// whose entry waypoint is nearest (ties: lower id).
inline std::vector<std::size_t> order_regions(const std::vector<RegionPlan>& plans, Vec2 from) {
    std::vector<std::size_t> order;
    std::vector<bool> used(plans.size(), false);
    Vec2 cur = from;
    for (std::size_t step = 0; step < plans.size(); ++step) {
        std::size_t best = plans.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < plans.size(); ++i) {
            if (used[i]) continue;
            const double d = distance(cur, plans[i].waypoints.front().pos);
            if (d < best_d || (d == best_d && best < plans.size() && plans[i].region_id < plans[best].region_id)) {
                best = i;
                best_d = d;
            }
        }
        used[best] = true;
        order.push_back(best);
        cur = plans[best].waypoints.back().pos;
    }
    return order;
}

/// One boustrophedon sub-plan per region, visited in greedy nearest-entry
/// order starting at the map origin. Regions without any kept cell centre
/// (or single-pixel regions) contribute no waypoints.
inline SurveyPlan plan_survey(const SegmentedMap& seg, const BinaryGrid& inflated, double cell_size = kDefaultCellSize) {
    if (seg.regions.empty()) throw EmptyPlan("segmentation has no regions");
    std::vector<RegionPlan> plans;
    for (const auto& region : seg.regions) {
        if (region.area_px() < 2) continue;
        RegionPlan rp;
        rp.region_id = region.id;
        rp.axes = principal_axes(region);
        const auto rect = bounding_rectangle(region, rp.axes);
        for (auto& wp : grid_waypoints(rect, region, seg, cell_size))
            if (inflated.is_free(wp.pos)) rp.waypoints.push_back(wp);
        if (!rp.waypoints.empty()) plans.push_back(std::move(rp));
    }
    if (plans.empty()) throw EmptyPlan("no region produced waypoints");
    SurveyPlan plan;
    plan.cell_size = cell_size;
    plan.start = seg.geom.origin;
    for (std::size_t i : order_regions(plans, plan.start)) plan.regions.push_back(std::move(plans[i]));
    return plan;
}

}  // namespace auf
