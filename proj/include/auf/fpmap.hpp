#pragma once

// GP fingerprint map: per reference location, per (AP, band), the predicted
// RSSI mean and variance. One GP per (AP, band, region), trained on that
// region's samples (Abnormal ones excluded) and queried at the region's
// reference locations.

#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "auf/anomaly.hpp"
#include "auf/fingerprint.hpp"
#include "auf/gp.hpp"
#include "auf/pathplan.hpp"

namespace auf {

struct ReferencePoint {
    Vec2 pos{};
    int region_id = -1;
};

inline std::vector<ReferencePoint> reference_points(const SurveyPlan& plan) {
    std::vector<ReferencePoint> out;
    for (const auto& wp : plan.flatten()) out.push_back({wp.pos, wp.region_id});
    return out;
}

using GroupKey = std::tuple<int, Band, int>;  // (ap, band, region)

struct FingerprintMap {
    std::vector<ReferencePoint> points;
    std::vector<int> aps;  // sorted
    // Row-major [point][ap][band].
    std::vector<double> mean;
    std::vector<double> var;
    // Groups with no training data, filled with (-100, prior variance).
    std::set<GroupKey> imputed;

    [[nodiscard]] std::size_t n_points() const { return points.size(); }
    [[nodiscard]] std::size_t n_features() const { return aps.size() * kNumBands; }
    [[nodiscard]] std::size_t feature(std::size_t ap_index, Band b) const {
        return ap_index * kNumBands + static_cast<std::size_t>(band_index(b));
    }
    [[nodiscard]] std::optional<std::size_t> ap_index(int ap_id) const {
        const auto it = std::lower_bound(aps.begin(), aps.end(), ap_id);
        if (it == aps.end() || *it != ap_id) return std::nullopt;
        return static_cast<std::size_t>(it - aps.begin());
    }
    [[nodiscard]] std::size_t at(std::size_t point, std::size_t feat) const { return point * n_features() + feat; }
    [[nodiscard]] double mean_at(std::size_t point, std::size_t feat) const { return mean[at(point, feat)]; }
    [[nodiscard]] double var_at(std::size_t point, std::size_t feat) const { return var[at(point, feat)]; }
};

struct MapParams {
    // Used when no per-group hyperparameters are supplied; nullopt = fit them.
    std::optional<GpHyper> fixed_hyper;
    HyperSearch search;
    // Lost samples are fingerprints at -100 dBm (weak or absent signal).
    bool include_lost = true;
};

inline FingerprintMap build_map(const FingerprintDatabase& db, const std::vector<ReferencePoint>& points,
                                const MapParams& params = {},
                                const std::map<GroupKey, GpHyper>* group_hyper = nullptr) {
    FingerprintMap m;
    m.points = points;
    m.aps = db.ap_ids();
    m.mean.assign(m.n_points() * m.n_features(), kRssiFloor);
    m.var.assign(m.mean.size(), 0.0);

    std::map<int, std::vector<std::size_t>> region_points;
    for (std::size_t j = 0; j < points.size(); ++j) region_points[points[j].region_id].push_back(j);

    std::map<GroupKey, std::pair<std::vector<Vec2>, std::vector<double>>> train;
    for (const auto& s : db.samples) {
        const bool lost = s.flag == SampleFlag::Lost;
        if (s.flag == SampleFlag::Abnormal || (lost && !params.include_lost)) continue;
        const auto& loc = db.location_of(s);
        auto& [x, y] = train[{s.ap_id, s.band, loc.region_id}];
        x.push_back(loc.pos);
        y.push_back(lost ? kRssiFloor : s.rssi);
    }

    for (std::size_t a = 0; a < m.aps.size(); ++a)
        for (Band b : kBands)
            for (const auto& [region, idx] : region_points) {
                const GroupKey key{m.aps[a], b, region};
                const std::size_t f = m.feature(a, b);
                GpHyper h = params.fixed_hyper.value_or(kDefaultHyper);
                if (group_hyper)
                    if (auto it = group_hyper->find(key); it != group_hyper->end()) h = it->second;
                const auto tit = train.find(key);
                if (tit == train.end()) {
                    m.imputed.insert(key);
                    for (std::size_t j : idx) m.var[m.at(j, f)] = h.sigma_f * h.sigma_f + h.sigma_n * h.sigma_n;
                    continue;
                }
                const auto& [x, y] = tit->second;
                const double mu = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
                if (!params.fixed_hyper && !(group_hyper && group_hyper->count(key)))
                    h = fit_hyperparameters(x, y, mu, params.search).hyper;
                std::vector<Vec2> xs;
                for (std::size_t j : idx) xs.push_back(points[j].pos);
                const auto pred = gp_predict(gp_fit(x, y, h, mu), xs);
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    m.mean[m.at(idx[k], f)] = clamp_rssi(pred.mean[k]);
                    m.var[m.at(idx[k], f)] = pred.var[k];
                }
            }
    return m;
}

/// Hyperparameters from a detection pass, keyed for build_map.
inline std::map<GroupKey, GpHyper> hypers_from(const std::vector<DetectionJob>& jobs) {
    std::map<GroupKey, GpHyper> out;
    for (const auto& j : jobs)
        if (j.report && !j.report->hyper_defaulted) out[{j.ap_id, j.band, j.region_id}] = j.report->hyper;
    return out;
}

}  // namespace auf
