#pragma once

// Online localization against a FingerprintMap: Bayes (max log-likelihood),
// KNN in RSSI space, a SIR particle filter on top of either, and error
// statistics over simulated walks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "auf/fpmap.hpp"
#include "auf/gridmap.hpp"
#include "auf/rfsim.hpp"

namespace auf {

struct ObsEntry {
    int ap_id = 0;
    Band band = Band::B24;
    double rssi = kRssiFloor;
};
using Observation = std::vector<ObsEntry>;

/// Lost readings become -100 dBm.
inline Observation observation_from(const std::vector<ScanReading>& scan) {
    Observation o;
    for (const auto& r : scan) o.push_back({r.ap_id, r.band, r.lost ? kRssiFloor : clamp_rssi(r.rssi)});
    return o;
}

/// Observation laid out like the map's features; absent entries read -100.
inline std::vector<double> dense_observation(const FingerprintMap& m, const Observation& o) {
    std::vector<double> v(m.n_features(), kRssiFloor);
    for (const auto& e : o)
        if (auto a = m.ap_index(e.ap_id)) v[m.feature(*a, e.band)] = clamp_rssi(e.rssi);
    return v;
}

struct LocalizeParams {
    double obs_noise_db = 0.0;  // added in quadrature to the map variance
    int k = 2;
    bool knn_weighted = false;  // inverse-distance weights instead of a plain centroid
};

/// Per reference point: sum over features of log N(o | mean, var + obs_noise^2).
inline std::vector<double> log_likelihoods(const FingerprintMap& m, const std::vector<double>& o,
                                           double obs_noise_db = 0.0) {
    const double add = obs_noise_db * obs_noise_db;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    std::vector<double> ll(m.n_points(), 0.0);
    for (std::size_t j = 0; j < m.n_points(); ++j) {
        double s = 0.0;
        for (std::size_t f = 0; f < m.n_features(); ++f) {
            const double v = m.var_at(j, f) + add;
            const double d = o[f] - m.mean_at(j, f);
            s -= 0.5 * (log2pi + std::log(v) + d * d / v);
        }
        ll[j] = s;
    }
    return ll;
}

inline std::size_t argmax_first(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

struct BayesResult {
    std::size_t index = 0;
    Vec2 pos{};
};

inline BayesResult bayes_localize(const FingerprintMap& m, const Observation& obs, const LocalizeParams& p = {}) {
    if (obs.empty()) throw Error("bayes_localize: empty observation");
    if (m.n_points() == 0) throw Error("bayes_localize: empty map");
    const auto j = argmax_first(log_likelihoods(m, dense_observation(m, obs), p.obs_noise_db));
    return {j, m.points[j].pos};
}

/// Reference points ordered by RSSI-space distance (ties by index).
inline std::vector<std::size_t> rssi_nearest(const FingerprintMap& m, const std::vector<double>& o, std::size_t k,
                                             std::vector<double>* dist = nullptr) {
    std::vector<double> d2(m.n_points(), 0.0);
    for (std::size_t j = 0; j < m.n_points(); ++j)
        for (std::size_t f = 0; f < m.n_features(); ++f) {
            const double d = o[f] - m.mean_at(j, f);
            d2[j] += d * d;
        }
    std::vector<std::size_t> idx(m.n_points());
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
    idx.resize(k);
    if (dist) {
        dist->clear();
        for (std::size_t j : idx) dist->push_back(std::sqrt(d2[j]));
    }
    return idx;
}

inline Vec2 knn_localize(const FingerprintMap& m, const Observation& obs, const LocalizeParams& p = {}) {
    if (p.k < 1 || static_cast<std::size_t>(p.k) > m.n_points()) throw ConfigError("knn_localize: need 1 <= K <= m");
    std::vector<double> dist;
    const auto nn = rssi_nearest(m, dense_observation(m, obs), static_cast<std::size_t>(p.k), &dist);
    Vec2 sum{};
    double wsum = 0.0;
    for (std::size_t i = 0; i < nn.size(); ++i) {
        double w = 1.0;
        if (p.knn_weighted) {
            if (dist[i] == 0.0) return m.points[nn[i]].pos;
            w = 1.0 / dist[i];
        }
        sum = sum + m.points[nn[i]].pos * w;
        wsum += w;
    }
    return sum * (1.0 / wsum);
}

// ---------------------------------------------------------------------------
// Particle filter
// ---------------------------------------------------------------------------

enum class PfMethod { BayesLikelihood, KnnSnap };

struct PfParams {
    std::size_t n_particles = 500;
    double motion_std_m = 0.5;       // per step
    double knn_snap_sigma_m = 1.0;   // KnnSnap: Gaussian weight around the KNN fix
    double lookup_resolution_m = 0.1;
    int max_motion_tries = 20;       // redraws before a particle stays put
};

struct Particle {
    Vec2 pos{};
    double weight = 0.0;
};

/// Nearest reference point for every cell of a coarse raster over the map.
class NearestLookup {
public:
    NearestLookup(const FingerprintMap& m, const GridGeometry& area, double res) {
        geom_.resolution = res;
        geom_.origin = area.origin;
        const Vec2 hi = area.to_world(area.width - 1, area.height - 1);
        geom_.width = static_cast<int>(std::ceil((hi.x - area.origin.x) / res)) + 1;
        geom_.height = static_cast<int>(std::ceil((hi.y - area.origin.y) / res)) + 1;
        idx_.resize(geom_.size());
        for (std::size_t c = 0; c < idx_.size(); ++c) {
            const Vec2 w = geom_.to_world(geom_.pixel_of(c));
            std::size_t best = 0;
            double bd = detail::kInf;
            for (std::size_t j = 0; j < m.n_points(); ++j) {
                const double d = (m.points[j].pos - w).squared_norm();
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            idx_[c] = best;
        }
    }

    [[nodiscard]] std::size_t operator()(Vec2 w) const {
        Pixel p = geom_.to_pixel(w);
        p.col = std::clamp(p.col, 0, geom_.width - 1);
        p.row = std::clamp(p.row, 0, geom_.height - 1);
        return idx_[geom_.index(p)];
    }

private:
    GridGeometry geom_;
    std::vector<std::size_t> idx_;
};

class ParticleFilter {
public:
    ParticleFilter(const FingerprintMap& m, const BinaryGrid& free, PfParams p, std::uint64_t seed,
                   LocalizeParams lp = {})
        : map_(m), free_(free), p_(p), lp_(lp), rng_(Rng::stream(seed, "particle-filter")),
          lookup_(m, free.geom, p.lookup_resolution_m) {
        if (p_.n_particles < 100) throw ConfigError("particle filter needs at least 100 particles");
        for (std::size_t i = 0; i < free.cells.size(); ++i)
            if (free.cells[i] == Cell::Free) free_idx_.push_back(i);
        if (free_idx_.empty()) throw Error("particle filter: no free space");
        reinitialize();
    }

    /// Predict, weight by `obs`, resample if the effective size drops below N/2.
    Vec2 step(const Observation& obs, PfMethod method) {
        predict();
        update(obs, method);
        if (effective_size() < 0.5 * static_cast<double>(particles_.size())) resample();
        return estimate();
    }

    [[nodiscard]] Vec2 estimate() const {
        Vec2 s{};
        for (const auto& q : particles_) s = s + q.pos * q.weight;
        return s;
    }
    /// Weighted mean squared distance from the estimate (m^2).
    [[nodiscard]] double spread() const {
        const Vec2 e = estimate();
        double s = 0.0;
        for (const auto& q : particles_) s += q.weight * (q.pos - e).squared_norm();
        return s;
    }
    [[nodiscard]] double effective_size() const {
        double s = 0.0;
        for (const auto& q : particles_) s += q.weight * q.weight;
        return 1.0 / s;
    }
    [[nodiscard]] const std::vector<Particle>& particles() const { return particles_; }
    [[nodiscard]] int reinitializations() const { return reinit_; }

private:
    void reinitialize() {
        particles_.assign(p_.n_particles, {});
        const double w = 1.0 / static_cast<double>(p_.n_particles);
        const double r = free_.geom.resolution;
        for (auto& q : particles_) {
            const Pixel px = free_.geom.pixel_of(free_idx_[rng_.index(free_idx_.size())]);
            Vec2 pos = free_.geom.to_world(px) + Vec2{rng_.uniform(-0.5, 0.5) * r, rng_.uniform(-0.5, 0.5) * r};
            if (!free_.is_free(pos)) pos = free_.geom.to_world(px);
            q = {pos, w};
        }
    }

    void predict() {
        if (p_.motion_std_m <= 0.0) return;
        for (auto& q : particles_)
            for (int t = 0; t < p_.max_motion_tries; ++t) {
                const Vec2 cand = q.pos + Vec2{rng_.normal(0, p_.motion_std_m), rng_.normal(0, p_.motion_std_m)};
                if (free_.is_free(cand)) {
                    q.pos = cand;
                    break;
                }
            }
    }

    void update(const Observation& obs, PfMethod method) {
        std::vector<double> logw(particles_.size());
        if (method == PfMethod::BayesLikelihood) {
            const auto ll = log_likelihoods(map_, dense_observation(map_, obs), lp_.obs_noise_db);
            for (std::size_t i = 0; i < particles_.size(); ++i) logw[i] = ll[lookup_(particles_[i].pos)];
        } else {
            const Vec2 fix = knn_localize(map_, obs, lp_);
            const double s2 = p_.knn_snap_sigma_m * p_.knn_snap_sigma_m;
            for (std::size_t i = 0; i < particles_.size(); ++i)
                logw[i] = -0.5 * (particles_[i].pos - fix).squared_norm() / s2;
        }
        double mx = -detail::kInf;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            logw[i] += std::log(particles_[i].weight);
            mx = std::max(mx, logw[i]);
        }
        if (!std::isfinite(mx)) {
            ++reinit_;
            reinitialize();
            return;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            particles_[i].weight = std::exp(logw[i] - mx);
            sum += particles_[i].weight;
        }
        for (auto& q : particles_) q.weight /= sum;
    }

    void resample() {
        const std::size_t n = particles_.size();
        std::vector<Particle> out(n);
        const double step = 1.0 / static_cast<double>(n);
        double u = rng_.uniform() * step;
        double c = particles_[0].weight;
        std::size_t i = 0;
        for (std::size_t k = 0; k < n; ++k) {
            while (u > c && i + 1 < n) c += particles_[++i].weight;
            out[k] = {particles_[i].pos, step};
            u += step;
        }
        particles_ = std::move(out);
    }

    const FingerprintMap& map_;
    const BinaryGrid& free_;
    PfParams p_;
    LocalizeParams lp_;
    Rng rng_;
    NearestLookup lookup_;
    std::vector<std::size_t> free_idx_;
    std::vector<Particle> particles_;
    int reinit_ = 0;
};

struct PfTrack {
    std::vector<Vec2> estimates;
    std::vector<double> spread;
    int reinitializations = 0;
};

inline PfTrack pf_track(const FingerprintMap& m, const BinaryGrid& free, const std::vector<Observation>& obs,
                        PfMethod method, const PfParams& p = {}, std::uint64_t seed = 0, const LocalizeParams& lp = {}) {
    ParticleFilter pf(m, free, p, seed, lp);
    PfTrack out;
    for (const auto& o : obs) {
        out.estimates.push_back(pf.step(o, method));
        out.spread.push_back(pf.spread());
    }
    out.reinitializations = pf.reinitializations();
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

enum class LocMethod { Bayes, Knn, PfBayes, PfKnn };

inline std::string_view method_name(LocMethod m) {
    switch (m) {
        case LocMethod::Bayes: return "bayes";
        case LocMethod::Knn: return "knn";
        case LocMethod::PfBayes: return "pf-bayes";
        case LocMethod::PfKnn: return "pf-knn";
    }
    return "?";
}

inline LocMethod parse_method(std::string_view s) {
    for (auto m : {LocMethod::Bayes, LocMethod::Knn, LocMethod::PfBayes, LocMethod::PfKnn})
        if (method_name(m) == s) return m;
    throw ConfigError("unknown localization method '" + std::string(s) + "'");
}

/// Random walk of fixed-length steps inside free space. The heading keeps
/// its direction with small noise and turns randomly when blocked.
inline std::vector<Vec2> random_walk(const BinaryGrid& free, std::size_t n_points, double step_m, Rng& rng) {
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < free.cells.size(); ++i)
        if (free.cells[i] == Cell::Free) free_idx.push_back(i);
    if (free_idx.empty()) throw Error("random_walk: no free space");
    auto segment_free = [&](Vec2 a, Vec2 b) {
        const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / (0.5 * free.geom.resolution))));
        for (int k = 0; k <= n; ++k)
            if (!free.is_free(a + (b - a) * (static_cast<double>(k) / n))) return false;
        return true;
    };
    std::vector<Vec2> out{free.geom.to_world(free.geom.pixel_of(free_idx[rng.index(free_idx.size())]))};
    double heading = rng.uniform(0, 2 * std::numbers::pi);
    while (out.size() < n_points) {
        bool moved = false;
        for (int tries = 0; tries < 64 && !moved; ++tries) {
            const double h = tries == 0 ? heading + rng.normal(0, 0.3) : rng.uniform(0, 2 * std::numbers::pi);
            const Vec2 next = out.back() + Vec2{std::cos(h), std::sin(h)} * step_m;
            if (segment_free(out.back(), next)) {
                out.push_back(next);
                heading = h;
                moved = true;
            }
        }
        if (!moved) out.push_back(out.back());
    }
    return out;
}

struct ErrorStats {
    std::vector<double> errors;
    double mean_m = 0.0;
    double max_m = 0.0;
    // (error_m, fraction) at fractions 0, 0.01, ..., 1 (nearest rank).
    std::vector<std::pair<double, double>> cdf;
};

inline ErrorStats error_stats(std::vector<double> errors) {
    ErrorStats s;
    s.errors = errors;
    if (errors.empty()) return s;
    s.mean_m = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    std::sort(errors.begin(), errors.end());
    s.max_m = errors.back();
    const auto n = errors.size();
    for (int q = 0; q <= 100; ++q) {
        const double frac = q / 100.0;
        const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(frac * static_cast<double>(n))));
        s.cdf.emplace_back(errors[rank - 1], frac);
    }
    return s;
}

struct EvalParams {
    LocalizeParams loc;
    PfParams pf;
    double scan_interval_s = 3.0;
    int epoch = 0;
};

/// Observations drawn from `world` along `trajectory` with a fresh stream
/// from `seed`, localized with `method`.
inline ErrorStats evaluate(const FingerprintMap& m, const RfWorld& world, const BinaryGrid& free,
                           const std::vector<Vec2>& trajectory, LocMethod method, std::uint64_t seed,
                           const EvalParams& p = {}) {
    Rng rng = Rng::stream(seed, "eval-observations");
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < trajectory.size(); ++i)
        obs.push_back(observation_from(
            simulate_scan(world, trajectory[i], static_cast<double>(i) * p.scan_interval_s, p.epoch, rng)));
    std::vector<Vec2> est;
    switch (method) {
        case LocMethod::Bayes:
            for (const auto& o : obs) est.push_back(bayes_localize(m, o, p.loc).pos);
            break;
        case LocMethod::Knn:
            for (const auto& o : obs) est.push_back(knn_localize(m, o, p.loc));
            break;
        case LocMethod::PfBayes:
        case LocMethod::PfKnn:
            est = pf_track(m, free, obs, method == LocMethod::PfBayes ? PfMethod::BayesLikelihood : PfMethod::KnnSnap,
                           p.pf, seed, p.loc)
                      .estimates;
            break;
    }
    std::vector<double> err;
    for (std::size_t i = 0; i < trajectory.size(); ++i) err.push_back(distance(est[i], trajectory[i]));
    return error_stats(std::move(err));
}

}  // namespace auf
