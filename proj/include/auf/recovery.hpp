#pragma once

// Lost-signal recovery. For each AP the difference between its 2.4 GHz and
// 5 GHz RSSI is a smooth function of position; an epsilon-SVR with an RBF
// kernel learns it from locations where both bands were measured and fills
// in a single lost band from the other. Dual loss falls back to -100 dBm.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <vector>

#include "auf/fingerprint.hpp"

namespace auf {

struct DiffSample {
    Vec2 pos{};
    double delta_db = 0.0;  // P_2.4 - P_5
};

/// One sample per location where both bands of `ap_id` are Measured.
/// `region_id` < 0 means all regions.
inline std::vector<DiffSample> collect_diff_samples(const FingerprintDatabase& db, int ap_id, int region_id = -1) {
    std::map<int, std::array<const FingerprintSample*, kNumBands>> by_loc;
    for (const auto& s : db.samples) {
        if (s.ap_id != ap_id) continue;
        if (region_id >= 0 && db.location_of(s).region_id != region_id) continue;
        by_loc[s.loc][static_cast<std::size_t>(band_index(s.band))] = &s;
    }
    std::vector<DiffSample> out;
    for (const auto& [loc, pair] : by_loc) {
        const auto* a = pair[0];
        const auto* b = pair[1];
        if (a && b && a->flag == SampleFlag::Measured && b->flag == SampleFlag::Measured)
            out.push_back({db.locations[static_cast<std::size_t>(loc)].pos, a->rssi - b->rssi});
    }
    return out;
}

struct SvrParams {
    double C = 10.0;
    double epsilon_db = 1.0;
    double gamma = 0.0;  // 1/m^2; 0 selects the median heuristic
    std::size_t min_samples = 10;
    double tolerance = 1e-3;
    int max_sweeps = 20000;
};

/// 1 / (2 median^2) over pairwise distances; 1 when degenerate.
inline double median_heuristic_gamma(const std::vector<Vec2>& pts) {
    std::vector<double> d;
    d.reserve(pts.size() * (pts.size() - 1) / 2);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back(distance(pts[i], pts[j]));
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med > 0.0 ? 1.0 / (2.0 * med * med) : 1.0;
}

/// Epsilon-insensitive SVR on 2-D positions with an RBF kernel.
/// f(x) = bias + sum_i coef_i * exp(-gamma |x - x_i|^2), bias = target mean.
struct SvrModel {
    std::vector<Vec2> support;
    std::vector<double> coef;
    double gamma = 1.0;
    double bias = 0.0;
    bool constant = false;  // fell back to the mean (too few samples)
    int sweeps = 0;
    bool converged = true;

    [[nodiscard]] double predict(Vec2 x) const {
        double f = bias;
        for (std::size_t i = 0; i < support.size(); ++i) {
            const Vec2 d = x - support[i];
            f += coef[i] * std::exp(-gamma * d.dot(d));
        }
        return f;
    }
};

/// Dual coordinate descent on
///   min_b  1/2 b'Kb - y'b + eps |b|_1   s.t. -C <= b_i <= C
/// with y centred on its mean (the mean is the bias, so there is no
/// equality constraint). Stops when no coordinate moves by more than
/// `tolerance` in one sweep.
inline SvrModel fit_svr(const std::vector<Vec2>& x, const std::vector<double>& y, const SvrParams& p) {
    if (x.size() != y.size()) throw Error("fit_svr: size mismatch");
    SvrModel m;
    const std::size_t n = x.size();
    m.bias = n ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n) : 0.0;
    if (n < std::max<std::size_t>(p.min_samples, 1)) {
        m.constant = true;
        return m;
    }
    m.gamma = p.gamma > 0.0 ? p.gamma : median_heuristic_gamma(x);

    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const Vec2 d = x[i] - x[j];
            K[i * n + j] = K[j * n + i] = std::exp(-m.gamma * d.dot(d));
        }
    std::vector<double> beta(n, 0.0), kb(n, 0.0), yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - m.bias;

    m.converged = false;
    for (m.sweeps = 1; m.sweeps <= p.max_sweeps; ++m.sweeps) {
        double max_step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double kii = K[i * n + i];
            const double g = kb[i] - yc[i];
            const double z = beta[i] - g / kii;
            const double shrink = std::max(std::abs(z) - p.epsilon_db / kii, 0.0);
            const double nb = std::clamp(std::copysign(shrink, z), -p.C, p.C);
            const double step = nb - beta[i];
            if (step == 0.0) continue;
            beta[i] = nb;
            const double* col = &K[i * n];
            for (std::size_t j = 0; j < n; ++j) kb[j] += step * col[j];
            max_step = std::max(max_step, std::abs(step) * kii);
        }
        if (max_step <= p.tolerance) {
            m.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (beta[i] != 0.0) {
            m.support.push_back(x[i]);
            m.coef.push_back(beta[i]);
        }
    return m;
}

enum class RecoverDirection { Predict24From5, Predict5From24 };

inline Band target_band(RecoverDirection d) { return d == RecoverDirection::Predict24From5 ? Band::B24 : Band::B5; }

/// Predicts (target band - source band) RSSI at a position.
struct DiffRegressor {
    int ap_id = 0;
    int region_id = -1;
    RecoverDirection direction = RecoverDirection::Predict24From5;
    SvrModel svr;

    [[nodiscard]] double predict(Vec2 pos) const { return svr.predict(pos); }
    [[nodiscard]] bool is_fallback() const { return svr.constant; }
};

inline DiffRegressor fit_diff_regressor(const std::vector<DiffSample>& samples, RecoverDirection dir,
                                        const SvrParams& params = {}, int ap_id = 0, int region_id = -1) {
    std::vector<Vec2> x;
    std::vector<double> y;
    const double sign = dir == RecoverDirection::Predict24From5 ? 1.0 : -1.0;
    for (const auto& s : samples) {
        x.push_back(s.pos);
        y.push_back(sign * s.delta_db);
    }
    return {ap_id, region_id, dir, fit_svr(x, y, params)};
}

/// Regressors per (region, AP) and direction.
struct RecoveryModel {
    std::map<std::pair<int, int>, std::array<DiffRegressor, 2>> by_region_ap;

    [[nodiscard]] const DiffRegressor* find(int region_id, int ap_id, RecoverDirection dir) const {
        auto it = by_region_ap.find({region_id, ap_id});
        if (it == by_region_ap.end()) return nullptr;
        return &it->second[dir == RecoverDirection::Predict24From5 ? 0 : 1];
    }
};

/// Region-local training: one pair of regressors per (region, AP).
inline RecoveryModel fit_recovery(const FingerprintDatabase& db, const SvrParams& params = {}) {
    RecoveryModel model;
    for (int region : db.region_ids())
        for (int ap : db.ap_ids()) {
            const auto samples = collect_diff_samples(db, ap, region);
            model.by_region_ap[{region, ap}] = {
                fit_diff_regressor(samples, RecoverDirection::Predict24From5, params, ap, region),
                fit_diff_regressor(samples, RecoverDirection::Predict5From24, params, ap, region)};
        }
    return model;
}

struct RecoveryStats {
    std::size_t recovered = 0;  // single-band losses filled in
    std::size_t dual_lost = 0;  // (location, AP) pairs with both bands lost
};

/// Fill single-band losses from the other band; both-lost pairs stay Lost
/// at -100 dBm. Other samples are never touched.
inline FingerprintDatabase recover_lost(const FingerprintDatabase& db, const RecoveryModel& model,
                                        RecoveryStats* stats = nullptr) {
    FingerprintDatabase out = db;
    RecoveryStats st;
    std::map<std::pair<int, int>, std::array<long, kNumBands>> pairs;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto& s = out.samples[i];
        auto [it, fresh] = pairs.try_emplace({s.loc, s.ap_id}, std::array<long, kNumBands>{-1, -1});
        it->second[static_cast<std::size_t>(band_index(s.band))] = static_cast<long>(i);
    }
    for (const auto& [key, idx] : pairs) {
        if (idx[0] < 0 || idx[1] < 0) continue;
        auto& s24 = out.samples[static_cast<std::size_t>(idx[0])];
        auto& s5 = out.samples[static_cast<std::size_t>(idx[1])];
        const bool l24 = s24.flag == SampleFlag::Lost;
        const bool l5 = s5.flag == SampleFlag::Lost;
        if (l24 && l5) {
            s24.rssi = s5.rssi = kRssiFloor;
            ++st.dual_lost;
            continue;
        }
        if (!l24 && !l5) continue;
        auto& lost = l24 ? s24 : s5;
        const auto& src = l24 ? s5 : s24;
        const auto dir = l24 ? RecoverDirection::Predict24From5 : RecoverDirection::Predict5From24;
        const auto& loc = out.locations[static_cast<std::size_t>(key.first)];
        const DiffRegressor* reg = model.find(loc.region_id, key.second, dir);
        if (!reg) throw Error("no recovery regressor for region " + std::to_string(loc.region_id) + ", AP " +
                              std::to_string(key.second));
        lost.rssi = clamp_rssi(src.rssi + reg->predict(loc.pos));
        lost.flag = SampleFlag::RecoveredDual;
        ++st.recovered;
    }
    if (stats) *stats = st;
    return out;
}

}  // namespace auf
