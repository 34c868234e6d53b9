#pragma once

// Ground-truth dual-band RF world and the survey simulator.
//
// RSSI model (log-normal shadowing):
//   P(d) = tx_power_term - 10 * beta * log10(d / d0) + X
// where the shadow term X ~ N(0, shadow_sigma^2) is split into a static,
// spatially correlated field, a piecewise-constant temporal offset with
// exponentially distributed stable durations, and per-scan measurement
// noise. A per-(AP, band, epoch) shift models day-to-day drift.

#include <array>
#include <limits>
#include <numbers>
#include <variant>
#include <optional>
#include <utility>
#include <vector>

#include "auf/fingerprint.hpp"
#include "auf/gridmap.hpp"
#include "auf/pathplan.hpp"

namespace auf {

struct BandParams {
    double tx_power_term = -30.0;  // dBm at d0 (lumped transmit/gain/wavelength constant)
    double beta = 2.8;             // path-loss exponent
    double shadow_sigma = 4.0;     // dB
    double d0 = 1.0;               // m
};

inline constexpr BandParams kDefault24{-30.0, 2.8, 4.0, 1.0};
inline constexpr BandParams kDefault5{-33.0, 3.2, 4.0, 1.0};

struct AccessPoint {
    int id = 0;
    Vec2 position{};
    std::array<BandParams, kNumBands> bands{kDefault24, kDefault5};

    [[nodiscard]] const BandParams& band(Band b) const { return bands[static_cast<std::size_t>(band_index(b))]; }
};

struct LossParams {
    double p_floor = 0.005;  // baseline random loss probability
    double rssi_50 = -88.0; // dBm at which the logistic part reaches 50%
    double slope = 3.0;     // dB
};

struct TemporalParams {
    double mean_stable_s = 65.0;
    double epoch_shift_sigma = 3.0;  // dB
};

struct ShadowParams {
    double correlation_length_m = 2.0;
    double band_correlation = 0.9;  // mixing of the common field into each band
    double lattice_step_m = 0.5;
    // Variance split of shadow_sigma^2; the spatial share is the rest.
    double temporal_fraction = 0.02;
    double measurement_fraction = 0.12;
};

struct RfWorldParams {
    LossParams loss;
    TemporalParams temporal;
    ShadowParams shadow;
};

/// Deterministic part of the log-distance model.
inline double rssi_mean(const AccessPoint& ap, Band band, Vec2 pos) {
    const auto& bp = ap.band(band);
    const double d = std::max(distance(ap.position, pos), bp.d0);
    return bp.tx_power_term - 10.0 * bp.beta * std::log10(d / bp.d0);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double loss_probability(double rssi, const LossParams& p) {
    return p.p_floor + (1.0 - p.p_floor) * logistic((p.rssi_50 - rssi) / p.slope);
}

namespace detail {

/// Unit-variance Gaussian random field on a regular lattice: white noise
/// smoothed by a separable Gaussian kernel, sampled bilinearly.
class LatticeField {
public:
    LatticeField() = default;
    LatticeField(Vec2 lo, Vec2 hi, double step, double corr_len, Rng& rng) : lo_(lo), step_(step) {
        // Smoothing white noise with a kernel of std s gives correlation
        // exp(-d^2 / (4 s^2)); pick s so that it equals exp(-d^2 / (2 L^2)).
        const double ks = corr_len / std::numbers::sqrt2 / step;
        const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * ks)));
        nx_ = static_cast<int>(std::ceil((hi.x - lo.x) / step)) + 2;
        ny_ = static_cast<int>(std::ceil((hi.y - lo.y) / step)) + 2;
        const int wx = nx_ + 2 * rad, wy = ny_ + 2 * rad;
        std::vector<double> noise(static_cast<std::size_t>(wx) * static_cast<std::size_t>(wy));
        for (auto& v : noise) v = rng.normal();

        std::vector<double> kern(static_cast<std::size_t>(2 * rad + 1));
        double k2 = 0.0;
        for (int i = -rad; i <= rad; ++i) {
            const double w = std::exp(-0.5 * (i * i) / (ks * ks));
            kern[static_cast<std::size_t>(i + rad)] = w;
            k2 += w * w;
        }
        // 2-D variance is (sum w^2)^2 for a separable kernel.
        const double norm = 1.0 / k2;

        std::vector<double> tmp(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(wy));
        for (int y = 0; y < wy; ++y)
            for (int x = 0; x < nx_; ++x) {
                double acc = 0.0;
                for (int i = -rad; i <= rad; ++i)
                    acc += kern[static_cast<std::size_t>(i + rad)] *
                           noise[static_cast<std::size_t>(y) * wx + static_cast<std::size_t>(x + rad + i)];
                tmp[static_cast<std::size_t>(y) * nx_ + static_cast<std::size_t>(x)] = acc;
            }
        values_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), 0.0);
        for (int y = 0; y < ny_; ++y)
            for (int x = 0; x < nx_; ++x) {
                double acc = 0.0;
                for (int i = -rad; i <= rad; ++i)
                    acc += kern[static_cast<std::size_t>(i + rad)] *
                           tmp[static_cast<std::size_t>(y + rad + i) * nx_ + static_cast<std::size_t>(x)];
                values_[static_cast<std::size_t>(y) * nx_ + static_cast<std::size_t>(x)] = acc * norm;
            }
    }

    [[nodiscard]] double at(Vec2 p) const {
        if (values_.empty()) return 0.0;
        const double fx = std::clamp((p.x - lo_.x) / step_, 0.0, nx_ - 1.000001);
        const double fy = std::clamp((p.y - lo_.y) / step_, 0.0, ny_ - 1.000001);
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const double tx = fx - x0, ty = fy - y0;
        auto v = [&](int x, int y) { return values_[static_cast<std::size_t>(y) * nx_ + static_cast<std::size_t>(x)]; };
        return (1 - ty) * ((1 - tx) * v(x0, y0) + tx * v(x0 + 1, y0)) + ty * ((1 - tx) * v(x0, y0 + 1) + tx * v(x0 + 1, y0 + 1));
    }

private:
    Vec2 lo_{};
    double step_ = 1.0;
    int nx_ = 0, ny_ = 0;
    std::vector<double> values_;
};

}  // namespace detail

/// Ground-truth propagation world. Immutable after construction.
class RfWorld {
public:
    RfWorld(RfWorldParams params, std::vector<AccessPoint> aps, Vec2 bounds_lo, Vec2 bounds_hi, std::uint64_t seed)
        : params_(params), aps_(std::move(aps)), seed_(seed) {
        validate();
        const double margin = params_.shadow.correlation_length_m;
        const Vec2 lo = bounds_lo - Vec2{margin, margin};
        const Vec2 hi = bounds_hi + Vec2{margin, margin};
        for (const auto& ap : aps_) {
            Rng rng = Rng::stream(hash_keys(seed_, static_cast<std::uint64_t>(ap.id)), "shadow-field");
            Fields f;
            f.common = detail::LatticeField(lo, hi, params_.shadow.lattice_step_m, params_.shadow.correlation_length_m, rng);
            for (auto& b : f.own)
                b = detail::LatticeField(lo, hi, params_.shadow.lattice_step_m, params_.shadow.correlation_length_m, rng);
            fields_.push_back(std::move(f));
        }
    }

    [[nodiscard]] const RfWorldParams& params() const { return params_; }
    [[nodiscard]] const std::vector<AccessPoint>& aps() const { return aps_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    [[nodiscard]] const AccessPoint& ap(int id) const { return aps_[index_of(id)]; }

    /// Unit-variance static spatial field for one band.
    [[nodiscard]] double spatial_field(int ap_id, Band band, Vec2 pos) const {
        const auto& f = fields_[index_of(ap_id)];
        const double rho = params_.shadow.band_correlation;
        return rho * f.common.at(pos) + std::sqrt(1.0 - rho * rho) * f.own[static_cast<std::size_t>(band_index(band))].at(pos);
    }

    /// Index of the stable segment containing `t` (>= 0).
    [[nodiscard]] int temporal_segment(int ap_id, int epoch, double t) const {
        double start = 0.0;
        for (int k = 0;; ++k) {
            const double u = keyed_uniform(seed_, 0x7E3Au, static_cast<std::uint64_t>(ap_id),
                                           static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(k));
            start += -params_.temporal.mean_stable_s * std::log(u);
            if (t < start) return k;
        }
    }

    /// Unit-variance temporal offset, constant within a stable segment.
    [[nodiscard]] double temporal_field(int ap_id, Band band, int epoch, double t) const {
        const auto k = static_cast<std::uint64_t>(temporal_segment(ap_id, epoch, t));
        return mix(0x7E3Bu, ap_id, band, epoch, k);
    }

    /// Day-to-day drift, drawn once per (ap, band, epoch).
    [[nodiscard]] double epoch_shift(int ap_id, Band band, int epoch) const {
        return params_.temporal.epoch_shift_sigma * mix(0xE90Cu, ap_id, band, epoch, 0);
    }

    /// Noise-free RSSI (without measurement noise or clamping).
    [[nodiscard]] double expected_rssi(int ap_id, Band band, Vec2 pos, double t, int epoch) const {
        const auto& a = ap(ap_id);
        const double sigma = a.band(band).shadow_sigma;
        const auto& sp = params_.shadow;
        const double spatial_share = std::max(0.0, 1.0 - sp.temporal_fraction - sp.measurement_fraction);
        return rssi_mean(a, band, pos) + sigma * std::sqrt(spatial_share) * spatial_field(ap_id, band, pos) +
               sigma * std::sqrt(sp.temporal_fraction) * temporal_field(ap_id, band, epoch, t) +
               epoch_shift(ap_id, band, epoch);
    }

    /// One RSSI reading, clamped to [-100, 0] dBm.
    double sample_rssi(int ap_id, Band band, Vec2 pos, double t, int epoch, Rng& rng) const {
        const double sigma = ap(ap_id).band(band).shadow_sigma;
        const double noise = sigma * std::sqrt(params_.shadow.measurement_fraction) * rng.normal();
        return clamp_rssi(expected_rssi(ap_id, band, pos, t, epoch) + noise);
    }

private:
    struct Fields {
        detail::LatticeField common;
        std::array<detail::LatticeField, kNumBands> own;
    };

    void validate() const {
        const auto& p = params_;
        if (!(p.loss.p_floor >= 0.0 && p.loss.p_floor < 1.0)) throw ConfigError("p_floor must be in [0, 1)");
        if (!(p.loss.slope > 0.0)) throw ConfigError("loss slope must be > 0");
        if (!(p.temporal.mean_stable_s > 0.0)) throw ConfigError("mean_stable_s must be > 0");
        if (p.temporal.epoch_shift_sigma < 0.0) throw ConfigError("epoch_shift_sigma must be >= 0");
        if (!(std::abs(p.shadow.band_correlation) <= 1.0)) throw ConfigError("band correlation must be in [-1, 1]");
        if (p.shadow.temporal_fraction < 0.0 || p.shadow.measurement_fraction < 0.0 ||
            p.shadow.temporal_fraction + p.shadow.measurement_fraction > 1.0)
            throw ConfigError("shadow variance fractions must be >= 0 and sum to <= 1");
        for (const auto& ap : aps_)
            for (const auto& b : ap.bands)
                if (!(b.beta > 0.0) || b.shadow_sigma < 0.0 || !(b.d0 > 0.0))
                    throw ConfigError("AP " + std::to_string(ap.id) + ": need beta > 0, shadow_sigma >= 0, d0 > 0");
    }

    [[nodiscard]] std::size_t index_of(int id) const {
        for (std::size_t i = 0; i < aps_.size(); ++i)
            if (aps_[i].id == id) return i;
        throw Error("unknown AP " + std::to_string(id));
    }

    [[nodiscard]] double mix(std::uint64_t tag, int ap_id, Band band, int epoch, std::uint64_t k) const {
        const double rho = params_.shadow.band_correlation;
        const auto a = static_cast<std::uint64_t>(ap_id);
        const auto e = static_cast<std::uint64_t>(epoch);
        const double common = keyed_normal(seed_, tag, a, e, k, 2u);
        const double own = keyed_normal(seed_, tag, a, e, k, static_cast<std::uint64_t>(band_index(band)));
        return rho * common + std::sqrt(1.0 - rho * rho) * own;
    }

    RfWorldParams params_;
    std::vector<AccessPoint> aps_;
    std::uint64_t seed_;
    std::vector<Fields> fields_;
};

/// Place `n_aps` APs on free pixels of `free_space`, deterministically.
inline std::vector<AccessPoint> place_aps(const BinaryGrid& free_space, int n_aps, std::uint64_t seed,
                                          BandParams b24 = kDefault24, BandParams b5 = kDefault5) {
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < free_space.cells.size(); ++i)
        if (free_space.cells[i] == Cell::Free) free_idx.push_back(i);
    if (free_idx.empty()) throw Error("no free space to place APs");
    Rng rng = Rng::stream(seed, "ap-placement");
    std::vector<AccessPoint> aps;
    for (int k = 0; k < n_aps; ++k) {
        const Pixel p = free_space.geom.pixel_of(free_idx[rng.index(free_idx.size())]);
        aps.push_back({k, free_space.geom.to_world(p), {b24, b5}});
    }
    return aps;
}

/// World spanning a grid's extent.
inline RfWorld make_world(const BinaryGrid& free_space, int n_aps, std::uint64_t seed, const RfWorldParams& params = {},
                          BandParams b24 = kDefault24, BandParams b5 = kDefault5) {
    const auto& g = free_space.geom;
    return RfWorld(params, place_aps(free_space, n_aps, seed, b24, b5), g.origin,
                   g.to_world(g.width - 1, g.height - 1), seed);
}

// ---------------------------------------------------------------------------
// Scanning
// ---------------------------------------------------------------------------

struct ScanReading {
    int ap_id = 0;
    Band band = Band::B24;
    double rssi = kRssiFloor;
    bool lost = false;
};

/// One WiFi scan: every (AP, band) read once, each independently lost with
/// loss_probability of its RSSI.
inline std::vector<ScanReading> simulate_scan(const RfWorld& world, Vec2 pos, double t, int epoch, Rng& rng) {
    std::vector<ScanReading> out;
    out.reserve(world.aps().size() * kNumBands);
    for (const auto& ap : world.aps())
        for (Band b : kBands) {
            const double rssi = world.sample_rssi(ap.id, b, pos, t, epoch, rng);
            const bool lost = rng.uniform() < loss_probability(rssi, world.params().loss);
            out.push_back({ap.id, b, lost ? kRssiFloor : rssi, lost});
        }
    return out;
}

// ---------------------------------------------------------------------------
// Survey simulation
// ---------------------------------------------------------------------------

struct MotionParams {
    double v_max = 0.5;              // m/s
    double accel = 0.3;              // m/s^2
    double turn_rate = 0.5;          // rad/s, in-place rotation
    // Navigation hand-off per waypoint goal (re-planning, tracking slow-down),
    // spread uniformly over the leg that reaches it.
    double waypoint_handoff_s = 3.0;
};

struct PowerParams {
    double drive_w = 35.0;
    double idle_w = 10.0;
    double accel_wh = 0.05;  // per de/acceleration cycle
    double laser_w = 8.0;
    double laptop_w = 35.0;
};

struct NoSojourn {
    double scan_interval_s = 3.0;
};

struct Sojourn {
    double dwell_s = 10.0;
    int scans_per_stop = 3;
};

using SurveyMode = std::variant<NoSojourn, Sojourn>;

struct TimeEnergyReport {
    double duration_s = 0.0;
    double travel_s = 0.0;  // driving and rotating
    double idle_s = 0.0;    // dwell and goal handling
    double robot_wh = 0.0;
    double laser_wh = 0.0;
    double laptop_wh = 0.0;
    int n_decel_events = 0;
    double distance_m = 0.0;

    [[nodiscard]] double total_wh() const { return robot_wh + laser_wh + laptop_wh; }

    TimeEnergyReport& operator+=(const TimeEnergyReport& o) {
        duration_s += o.duration_s;
        travel_s += o.travel_s;
        idle_s += o.idle_s;
        robot_wh += o.robot_wh;
        laser_wh += o.laser_wh;
        laptop_wh += o.laptop_wh;
        n_decel_events += o.n_decel_events;
        distance_m += o.distance_m;
        return *this;
    }
};

/// Duration of a rest-to-rest straight move under a trapezoidal profile.
inline double trapezoid_time(double len, const MotionParams& m) {
    if (len <= 0.0) return 0.0;
    const double ramp = m.v_max * m.v_max / m.accel;  // distance to accelerate and brake
    return len >= ramp ? len / m.v_max + m.v_max / m.accel : 2.0 * std::sqrt(len / m.accel);
}

/// Distance covered after `t` seconds of a rest-to-rest move of length `len`.
inline double trapezoid_distance(double t, double len, const MotionParams& m) {
    const double total = trapezoid_time(len, m);
    t = std::clamp(t, 0.0, total);
    const double ramp = m.v_max * m.v_max / m.accel;
    const double vpeak = len >= ramp ? m.v_max : std::sqrt(len * m.accel);
    const double ta = vpeak / m.accel;
    if (t <= ta) return 0.5 * m.accel * t * t;
    if (t <= total - ta) return 0.5 * m.accel * ta * ta + vpeak * (t - ta);
    const double tr = total - t;
    return len - 0.5 * m.accel * tr * tr;
}

namespace detail {

struct TimelineSegment {
    double t0 = 0.0, t1 = 0.0;
    Vec2 p0{}, p1{};
    double len = 0.0;  // 0 for stationary segments
    double move_s = 0.0;  // pure kinematic duration; the segment is stretched to t1 - t0
};

/// Robot timeline along a polyline. `stop_at[k]` forces a stop at point k.
/// Collinear pass-through points do not interrupt a run.
struct Timeline {
    std::vector<TimelineSegment> segments;
    std::vector<double> arrival;  // time at which each point is reached
    TimeEnergyReport report;

    [[nodiscard]] double end() const { return segments.empty() ? 0.0 : segments.back().t1; }

    [[nodiscard]] Vec2 position(double t, const MotionParams& m) const {
        auto it = std::upper_bound(segments.begin(), segments.end(), t,
                                   [](double v, const TimelineSegment& s) { return v < s.t1; });
        if (it == segments.end()) return segments.back().p1;
        if (it->len == 0.0) return it->p0;
        const double s = trapezoid_distance((t - it->t0) * it->move_s / (it->t1 - it->t0), it->len, m);
        return it->p0 + (it->p1 - it->p0) * (s / it->len);
    }
};

inline double heading_of(Vec2 d) { return std::atan2(d.y, d.x); }

inline Timeline build_timeline(const std::vector<Vec2>& pts, const std::vector<double>& dwell_at, const MotionParams& m) {
    Timeline tl;
    tl.arrival.assign(pts.size(), 0.0);
    if (pts.empty()) return tl;
    double t = 0.0;
    double heading = pts.size() >= 2 ? heading_of(pts[1] - pts[0]) : 0.0;
    auto still = [&](double dur, Vec2 at) {
        if (dur <= 0.0) return;
        tl.segments.push_back({t, t + dur, at, at, 0.0});
        t += dur;
        tl.report.idle_s += dur;
    };
    still(dwell_at[0], pts[0]);
    std::size_t k = 0;
    while (k + 1 < pts.size()) {
        // Extend the run through collinear points without dwell.
        std::size_t j = k + 1;
        const double h = heading_of(pts[j] - pts[k]);
        while (j + 1 < pts.size() && dwell_at[j] == 0.0 &&
               std::abs(std::remainder(heading_of(pts[j + 1] - pts[j]) - h, 2 * std::numbers::pi)) < 1e-6)
            ++j;
        const double len = distance(pts[k], pts[j]);
        if (len > 0.0) {
            const double turn = std::abs(std::remainder(h - heading, 2 * std::numbers::pi));
            if (turn > 1e-9) {
                const double dt = turn / m.turn_rate;
                tl.segments.push_back({t, t + dt, pts[k], pts[k], 0.0});
                t += dt;
                tl.report.travel_s += dt;
            }
            heading = h;
            const double dt_move = trapezoid_time(len, m);
            const double dt = dt_move + m.waypoint_handoff_s * static_cast<double>(j - k);
            tl.segments.push_back({t, t + dt, pts[k], pts[j], len, dt_move});
            for (std::size_t q = k + 1; q < j; ++q) {
                const double target = distance(pts[k], pts[q]);
                double lo = 0.0, hi = dt_move;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (trapezoid_distance(mid, len, m) < target ? lo : hi) = mid;
                }
                tl.arrival[q] = t + hi * dt / dt_move;
            }
            t += dt;
            tl.report.travel_s += dt;
            tl.report.distance_m += len;
            ++tl.report.n_decel_events;
            tl.arrival[j] = t;
        } else {
            tl.arrival[j] = t;
        }
        still(dwell_at[j], pts[j]);
        k = j;
    }
    tl.report.duration_s = t;
    return tl;
}

inline void charge_energy(TimeEnergyReport& r, const PowerParams& p) {
    r.robot_wh = (p.drive_w * r.travel_s + p.idle_w * r.idle_s) / 3600.0 + p.accel_wh * r.n_decel_events;
    r.laser_wh = p.laser_w * r.duration_s / 3600.0;
    r.laptop_wh = p.laptop_w * r.duration_s / 3600.0;
}

inline std::size_t nearest_index(const std::vector<Vec2>& pts, Vec2 q) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = distance(pts[i], q);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

/// Average several scans at a stop into one record per (AP, band).
inline void append_stop(FingerprintDatabase& db, const RfWorld& world, Vec2 pos, int region_id, double t0,
                        double interval, int n_scans, Rng& rng) {
    const int loc = static_cast<int>(db.locations.size());
    db.locations.push_back({pos, region_id, t0});
    std::vector<double> sum(world.aps().size() * kNumBands, 0.0);
    std::vector<int> cnt(sum.size(), 0);
    for (int s = 0; s < n_scans; ++s) {
        const auto scan = simulate_scan(world, pos, t0 + s * interval, db.epoch, rng);
        for (std::size_t i = 0; i < scan.size(); ++i)
            if (!scan[i].lost) {
                sum[i] += scan[i].rssi;
                ++cnt[i];
            }
    }
    std::size_t i = 0;
    for (const auto& ap : world.aps())
        for (Band b : kBands) {
            if (cnt[i] > 0)
                db.samples.push_back({loc, ap.id, b, clamp_rssi(sum[i] / cnt[i]), SampleFlag::Measured});
            else
                db.samples.push_back({loc, ap.id, b, kRssiFloor, SampleFlag::Lost});
            ++i;
        }
}

}  // namespace detail

struct SurveyResult {
    FingerprintDatabase db;
    TimeEnergyReport report;
};

/// Drive the plan and collect fingerprints.
///  - NoSojourn: scans fire every scan_interval_s while moving; each is
///    stamped with the interpolated position and filed under the region of
///    the nearest waypoint.
///  - Sojourn: stop at every waypoint, dwell, and record the mean of the
///    non-lost scans taken there.
inline SurveyResult simulate_survey(const RfWorld& world, const SurveyPlan& plan, const SurveyMode& mode,
                                    const MotionParams& motion, const PowerParams& power, Rng& rng, int epoch = 0) {
    const auto wps = plan.flatten();
    if (wps.empty()) throw EmptyPlan("survey plan has no waypoints");
    std::vector<Vec2> pts;
    for (const auto& w : wps) pts.push_back(w.pos);

    SurveyResult out;
    out.db.epoch = epoch;
    if (const auto* ns = std::get_if<NoSojourn>(&mode)) {
        if (!(ns->scan_interval_s > 0.0)) throw ConfigError("scan interval must be > 0");
        const auto tl = detail::build_timeline(pts, std::vector<double>(pts.size(), 0.0), motion);
        out.report = tl.report;
        const double end = tl.end();
        for (long k = 0;; ++k) {
            const double t = static_cast<double>(k) * ns->scan_interval_s;
            if (t > end + 1e-9) break;
            const Vec2 pos = tl.position(t, motion);
            const int region = wps[detail::nearest_index(pts, pos)].region_id;
            const int loc = static_cast<int>(out.db.locations.size());
            out.db.locations.push_back({pos, region, t});
            for (const auto& r : simulate_scan(world, pos, t, epoch, rng))
                out.db.samples.push_back({loc, r.ap_id, r.band, r.rssi, r.lost ? SampleFlag::Lost : SampleFlag::Measured});
        }
        // Each waypoint is represented by its nearest scan (earlier on ties).
        for (const auto& p : pts) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < out.db.locations.size(); ++i) {
                const double d = distance(out.db.locations[i].pos, p);
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(i);
                }
            }
            out.db.waypoint_loc.push_back(best);
        }
    } else {
        const auto& so = std::get<Sojourn>(mode);
        if (so.scans_per_stop < 1 || so.dwell_s < 0.0) throw ConfigError("sojourn needs >= 1 scan and dwell >= 0");
        const auto tl = detail::build_timeline(pts, std::vector<double>(pts.size(), so.dwell_s), motion);
        out.report = tl.report;
        const double interval = so.scans_per_stop > 1 ? so.dwell_s / so.scans_per_stop : 0.0;
        for (std::size_t k = 0; k < wps.size(); ++k)
            detail::append_stop(out.db, world, pts[k], wps[k].region_id, tl.arrival[k],
                                interval, so.scans_per_stop, rng);
        for (std::size_t k = 0; k < wps.size(); ++k) out.db.waypoint_loc.push_back(static_cast<int>(k));
    }
    detail::charge_energy(out.report, power);
    return out;
}

/// Sojourn visits to a list of locations after a survey (abnormal-signal
/// resurvey). Visits in greedy nearest-first order from `start`; the database
/// holds one averaged record per location in the input order.
inline SurveyResult resurvey_with_sojourn(const RfWorld& world, const std::vector<ScanLocation>& targets, Vec2 start,
                                          double start_time, const Sojourn& so, const MotionParams& motion,
                                          const PowerParams& power, Rng& rng, int epoch = 0) {
    SurveyResult out;
    out.db.epoch = epoch;
    if (targets.empty()) return out;
    std::vector<std::size_t> order;
    std::vector<bool> done(targets.size(), false);
    Vec2 cur = start;
    for (std::size_t step = 0; step < targets.size(); ++step) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (done[i]) continue;
            const double d = distance(cur, targets[i].pos);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        done[best] = true;
        order.push_back(best);
        cur = targets[best].pos;
    }
    std::vector<Vec2> pts{start};
    std::vector<double> dwell{0.0};
    for (std::size_t i : order) {
        pts.push_back(targets[i].pos);
        dwell.push_back(so.dwell_s);
    }
    const auto tl = detail::build_timeline(pts, dwell, motion);
    out.report = tl.report;
    const double interval = so.scans_per_stop > 1 ? so.dwell_s / so.scans_per_stop : 0.0;
    std::vector<double> when(targets.size());
    for (std::size_t k = 0; k < order.size(); ++k) when[order[k]] = start_time + tl.arrival[k + 1];
    for (std::size_t i = 0; i < targets.size(); ++i)
        detail::append_stop(out.db, world, targets[i].pos, targets[i].region_id, when[i], interval, so.scans_per_stop,
                            rng);
    detail::charge_energy(out.report, power);
    return out;
}

}  // namespace auf
