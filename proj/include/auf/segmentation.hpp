#pragma once

// Free-space segmentation of a distance image into regular regions:
//   1. free-space image (max inscribed-circle radius covering each pixel),
//   2. grouping of 4-connected pixels with equal quantized value,
//   3. ripple removal (absorb regions mostly enclosed by one neighbour),
//   4. merging of adjacent regions with similar value.

#include <map>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "auf/gridmap.hpp"

namespace auf {

struct SegmentParams {
    double quantization_m = 0.3;
    double overlap_threshold = 0.40;
    double value_tolerance_m = 0.3;
    double min_region_area_m2 = 1.0;  // 0 disables the final clean-up
};

/// Region-size image: each free pixel holds the largest circle radius (m)
/// that covers it, floored to a multiple of `quantization`. Obstacles hold 0
/// and level -1.
struct FreeSpaceImage : Raster<double> {
    using Raster::Raster;
    double quantization = 0.3;
    std::vector<int> levels;  // floor(value / quantization), -1 on obstacles
};

struct Region {
    int id = 0;
    std::vector<Pixel> pixels;
    double value = 0.0;  // representative free-space value in meters

    [[nodiscard]] std::size_t area_px() const { return pixels.size(); }
};

struct SegmentedMap {
    GridGeometry geom;
    std::vector<Region> regions;
    Raster<int> labels;  // region id, -1 on obstacles

    [[nodiscard]] int label_at(Vec2 w) const {
        const Pixel p = geom.to_pixel(w);
        return geom.contains(p.col, p.row) ? labels.at(p) : -1;
    }
    [[nodiscard]] const Region* find(int id) const {
        for (const auto& r : regions)
            if (r.id == id) return &r;
        return nullptr;
    }
};

namespace detail {

/// Squared distance in pixel units, recovered exactly from a distance image.
inline std::vector<long> squared_pixels(const DistanceImage& dist) {
    std::vector<long> sq(dist.cells.size());
    const double res = dist.resolution();
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double r = dist.cells[i] / res;
        sq[i] = std::isfinite(r) ? std::lround(r * r) : std::numeric_limits<long>::max();
    }
    return sq;
}

inline int quant_level(double v, double q) { return static_cast<int>(std::floor(v / q + 1e-9)); }

}  // namespace detail

inline FreeSpaceImage free_space_image(const DistanceImage& dist, double quantization) {
    if (!(quantization > 0.0)) throw Error("quantization must be > 0");
    const auto sq = detail::squared_pixels(dist);
    const GridGeometry& g = dist.geom;
    const double res = g.resolution;

    std::vector<long> best(sq.size(), 0);  // squared radius of the largest covering circle
    static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            const long s = sq[g.index(c, r)];
            if (s == 0) continue;
            const double rad = std::sqrt(static_cast<double>(s));
            // Skip circles contained in a neighbour's circle.
            bool dominated = false;
            for (int k = 0; k < 8 && !dominated; ++k) {
                const int nc = c + kDx[k];
                const int nr = r + kDy[k];
                if (!g.contains(nc, nr)) continue;
                const double step = k < 4 ? 1.0 : std::numbers::sqrt2;
                const double nrad = std::sqrt(static_cast<double>(sq[g.index(nc, nr)]));
                dominated = nrad - rad >= step * (1.0 - 1e-12);
            }
            if (dominated) continue;
            const int R = static_cast<int>(std::floor(rad + 1e-9));
            for (int dy = -R; dy <= R; ++dy) {
                const int rr = r + dy;
                if (rr < 0 || rr >= g.height) continue;
                for (int dx = -R; dx <= R; ++dx) {
                    const int cc = c + dx;
                    if (cc < 0 || cc >= g.width) continue;
                    if (static_cast<long>(dx) * dx + static_cast<long>(dy) * dy > s) continue;
                    const std::size_t qi = g.index(cc, rr);
                    if (sq[qi] == 0) continue;
                    best[qi] = std::max(best[qi], s);
                }
            }
        }
    }

    FreeSpaceImage fsi(g);
    fsi.quantization = quantization;
    fsi.levels.assign(sq.size(), -1);
    for (std::size_t i = 0; i < sq.size(); ++i) {
        if (sq[i] == 0) continue;
        const double v = std::sqrt(static_cast<double>(best[i])) * res;
        const int lvl = detail::quant_level(v, quantization);
        fsi.levels[i] = lvl;
        fsi.cells[i] = lvl * quantization;
    }
    return fsi;
}

namespace detail {

inline SegmentedMap segmented_from_labels(const GridGeometry& g, const std::vector<int>& raw,
                                          const std::map<int, double>& values) {
    // Renumber in raster order of each region's first pixel.
    SegmentedMap seg{g, {}, Raster<int>(g, -1)};
    std::map<int, int> remap;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const int l = raw[i];
        if (l < 0) continue;
        auto [it, fresh] = remap.try_emplace(l, static_cast<int>(seg.regions.size()));
        if (fresh) {
            Region reg;
            reg.id = it->second;
            reg.value = values.at(l);
            seg.regions.push_back(std::move(reg));
        }
        seg.regions[static_cast<std::size_t>(it->second)].pixels.push_back(g.pixel_of(i));
        seg.labels.cells[i] = it->second;
    }
    return seg;
}

/// Adjacency bookkeeping for iterative region merging.
class RegionGraph {
public:
    explicit RegionGraph(const SegmentedMap& seg) : geom_(seg.geom), labels_(seg.labels.cells) {
        const std::size_t n = seg.regions.size();
        parent_.resize(n);
        std::iota(parent_.begin(), parent_.end(), 0);
        area_.resize(n);
        value_.resize(n);
        perimeter_.assign(n, 0);
        alive_.assign(n, true);
        adj_.resize(n);
        for (const auto& r : seg.regions) {
            area_[static_cast<std::size_t>(r.id)] = static_cast<double>(r.area_px());
            value_[static_cast<std::size_t>(r.id)] = r.value;
        }
        const GridGeometry& g = seg.geom;
        for (int row = 0; row < g.height; ++row) {
            for (int col = 0; col < g.width; ++col) {
                const int a = labels_[g.index(col, row)];
                if (a < 0) continue;
                const int nb[4][2] = {{col + 1, row}, {col - 1, row}, {col, row + 1}, {col, row - 1}};
                for (const auto& n : nb) {
                    const int b = g.contains(n[0], n[1]) ? labels_[g.index(n[0], n[1])] : -1;
                    if (b == a) continue;
                    ++perimeter_[static_cast<std::size_t>(a)];
                    if (b >= 0) ++adj_[static_cast<std::size_t>(a)][b];
                }
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return alive_.size(); }
    [[nodiscard]] bool alive(int r) const { return alive_[static_cast<std::size_t>(r)]; }
    [[nodiscard]] double area(int r) const { return area_[static_cast<std::size_t>(r)]; }
    [[nodiscard]] double value(int r) const { return value_[static_cast<std::size_t>(r)]; }
    [[nodiscard]] long perimeter(int r) const { return perimeter_[static_cast<std::size_t>(r)]; }
    [[nodiscard]] const std::map<int, long>& neighbours(int r) const { return adj_[static_cast<std::size_t>(r)]; }

    /// Absorb `from` into `into`; `into` takes `new_value`.
    void merge(int from, int into, double new_value) {
        auto& fa = adj_[static_cast<std::size_t>(from)];
        auto& ia = adj_[static_cast<std::size_t>(into)];
        const long shared = fa.count(into) ? fa.at(into) : 0;
        perimeter_[static_cast<std::size_t>(into)] += perimeter_[static_cast<std::size_t>(from)] - 2 * shared;
        for (const auto& [nb, len] : fa) {
            if (nb == into) continue;
            ia[nb] += len;
            auto& na = adj_[static_cast<std::size_t>(nb)];
            na.erase(from);
            na[into] += len;
        }
        ia.erase(from);
        fa.clear();
        area_[static_cast<std::size_t>(into)] += area_[static_cast<std::size_t>(from)];
        value_[static_cast<std::size_t>(into)] = new_value;
        alive_[static_cast<std::size_t>(from)] = false;
        parent_[static_cast<std::size_t>(from)] = into;
    }

    [[nodiscard]] int root(int r) const {
        while (parent_[static_cast<std::size_t>(r)] != r) r = parent_[static_cast<std::size_t>(r)];
        return r;
    }

    [[nodiscard]] SegmentedMap build() const {
        std::vector<int> raw(labels_.size(), -1);
        std::map<int, double> values;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] < 0) continue;
            raw[i] = root(labels_[i]);
            values[raw[i]] = value_[static_cast<std::size_t>(raw[i])];
        }
        return segmented_from_labels(geom_, raw, values);
    }

private:
    GridGeometry geom_;
    std::vector<int> labels_;
    std::vector<int> parent_;
    std::vector<double> area_;
    std::vector<double> value_;
    std::vector<long> perimeter_;
    std::vector<bool> alive_;
    std::vector<std::map<int, long>> adj_;
};

}  // namespace detail

/// 4-connected components of equal quantized free-space value.
inline SegmentedMap group_regions(const FreeSpaceImage& fsi) {
    const GridGeometry& g = fsi.geom;
    std::vector<int> raw(g.size(), -1);
    std::map<int, double> values;
    int next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < raw.size(); ++seed) {
        if (fsi.levels[seed] < 0 || raw[seed] >= 0) continue;
        const int lvl = fsi.levels[seed];
        raw[seed] = next;
        values[next] = fsi.cells[seed];
        stack.assign(1, seed);
        while (!stack.empty()) {
            const Pixel p = g.pixel_of(stack.back());
            stack.pop_back();
            const int nb[4][2] = {{p.col + 1, p.row}, {p.col - 1, p.row}, {p.col, p.row + 1}, {p.col, p.row - 1}};
            for (const auto& n : nb) {
                if (!g.contains(n[0], n[1])) continue;
                const std::size_t qi = g.index(n[0], n[1]);
                if (raw[qi] >= 0 || fsi.levels[qi] != lvl) continue;
                raw[qi] = next;
                stack.push_back(qi);
            }
        }
        ++next;
    }
    return detail::segmented_from_labels(g, raw, values);
}

/// Absorb each region whose boundary shared with a neighbour that is at
/// least as large exceeds `overlap_threshold` of its own boundary length
/// (obstacle and map-border edges included). The largest shared boundary
/// wins; ties go to the lower id. Repeats to a fixpoint.
inline SegmentedMap remove_ripples(const SegmentedMap& seg, double overlap_threshold = 0.40) {
    if (!(overlap_threshold > 0.0 && overlap_threshold < 1.0)) throw Error("overlap threshold must be in (0, 1)");
    detail::RegionGraph graph(seg);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < static_cast<int>(graph.size()); ++a) {
            if (!graph.alive(a) || graph.perimeter(a) == 0) continue;
            int best = -1;
            long best_len = 0;
            for (const auto& [b, len] : graph.neighbours(a)) {
                if (graph.area(b) < graph.area(a)) continue;
                if (static_cast<double>(len) <= overlap_threshold * static_cast<double>(graph.perimeter(a))) continue;
                if (len > best_len) {  // map iteration is ascending, so ties keep the lower id
                    best = b;
                    best_len = len;
                }
            }
            if (best >= 0) {
                graph.merge(a, best, graph.value(best));
                changed = true;
            }
        }
    }
    return graph.build();
}

/// Merge adjacent regions whose values differ by at most `value_tolerance`,
/// closest pair first, using the area-weighted mean as the merged value.
inline SegmentedMap merge_similar(const SegmentedMap& seg, double value_tolerance) {
    if (value_tolerance < 0.0) throw Error("value tolerance must be >= 0");
    detail::RegionGraph graph(seg);
    while (true) {
        int best_a = -1, best_b = -1;
        double best_diff = std::numeric_limits<double>::infinity();
        for (int a = 0; a < static_cast<int>(graph.size()); ++a) {
            if (!graph.alive(a)) continue;
            for (const auto& [b, len] : graph.neighbours(a)) {
                if (b <= a) continue;
                const double diff = std::abs(graph.value(a) - graph.value(b));
                if (diff <= value_tolerance + 1e-9 && diff < best_diff) {
                    best_diff = diff;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (best_a < 0) break;
        const double wa = graph.area(best_a);
        const double wb = graph.area(best_b);
        const double merged = (wa * graph.value(best_a) + wb * graph.value(best_b)) / (wa + wb);
        graph.merge(best_b, best_a, merged);
    }
    return graph.build();
}

/// Fold regions smaller than `min_area_px` (door openings, single-pixel
/// leftovers) into the neighbour they share the most boundary with. The
/// absorbing region keeps its value; isolated regions are kept.
inline SegmentedMap absorb_small(const SegmentedMap& seg, std::size_t min_area_px) {
    detail::RegionGraph graph(seg);
    while (true) {
        int victim = -1;
        for (int a = 0; a < static_cast<int>(graph.size()); ++a) {
            if (!graph.alive(a) || graph.area(a) >= static_cast<double>(min_area_px) || graph.neighbours(a).empty())
                continue;
            if (victim < 0 || graph.area(a) < graph.area(victim)) victim = a;
        }
        if (victim < 0) break;
        int best = -1;
        long best_len = 0;
        for (const auto& [b, len] : graph.neighbours(victim))
            if (len > best_len) {
                best = b;
                best_len = len;
            }
        graph.merge(victim, best, graph.value(best));
    }
    return graph.build();
}

inline SegmentedMap segment(const DistanceImage& dist, const SegmentParams& params = {}) {
    const auto fsi = free_space_image(dist, params.quantization_m);
    const auto grouped = group_regions(fsi);
    const auto smoothed = remove_ripples(grouped, params.overlap_threshold);
    auto merged = merge_similar(smoothed, params.value_tolerance_m);
    if (params.min_region_area_m2 > 0.0) {
        const double px_area = dist.resolution() * dist.resolution();
        merged = absorb_small(merged, static_cast<std::size_t>(std::ceil(params.min_region_area_m2 / px_area - 1e-9)));
    }
    return merged;
}

/// Label image as 8-bit gray: obstacles 0, region k -> 1 + k (mod 255).
inline std::vector<std::uint8_t> label_gray(const SegmentedMap& seg) {
    std::vector<std::uint8_t> gray(seg.labels.cells.size(), 0);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        const int l = seg.labels.cells[i];
        if (l >= 0) gray[i] = static_cast<std::uint8_t>(1 + l % 255);
    }
    return gray;
}

}  // namespace auf
