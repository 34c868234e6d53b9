#pragma once

// Abnormal-signal handling: iterative largest-normalized-residual (LNR)
// detection with a GP per (AP, band, region), and repair either by shifting
// the previous epoch's value or by resurveying the location with sojourn.

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "auf/fingerprint.hpp"
#include "auf/gp.hpp"

namespace auf {

enum class ResidualScale {
    // (y - mu*) / sqrt(Sigma*) with the predictive variance at X* = X.
    // Shrinks gross errors: the sample itself pulls mu* toward it.
    Predictive,
    // Divide by the residual's own standard deviation,
    // sn^2 sqrt([(K + sn^2 I)^-1]_ii); the result is N(0, 1) under the model
    // and equals the leave-one-out standardized residual.
    ResidualCovariance,
};

/// Normalized residuals of the training samples.
inline std::vector<double> normalized_residuals(const GpModel& model,
                                                ResidualScale scale = ResidualScale::Predictive) {
    std::vector<double> r(model.size());
    if (scale == ResidualScale::Predictive) {
        const auto pred = gp_predict(model, model.train_x);
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = (model.train_y(static_cast<Eigen::Index>(i)) - pred.mean[i]) / std::sqrt(pred.var[i]);
        return r;
    }
    const auto n = static_cast<Eigen::Index>(model.size());
    const Eigen::MatrixXd Linv = model.factor.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double kinv_ii = Linv.col(i).squaredNorm();
        r[static_cast<std::size_t>(i)] = model.alpha(i) / std::sqrt(kinv_ii);
    }
    return r;
}

struct LnrParams {
    double t = 1.96;
    double max_iter_fraction = 0.3;  // of the initial sample count
    std::size_t min_samples = 5;
    bool centre = true;  // GP prior mean = mean of the retained samples
    ResidualScale scale = ResidualScale::ResidualCovariance;
    HyperSearch search;
};

struct ResidualReport {
    std::vector<std::size_t> outliers;  // input indices, in removal order
    std::vector<double> removed_r;      // r^N of each outlier when it was removed
    std::vector<double> residuals;      // final r^N per input index (NaN if removed)
    int iterations = 0;                 // GP fits performed
    bool converged = true;              // false: stopped with max |r^N| > t
    GpHyper hyper;
    bool hyper_defaulted = false;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Inverse of a symmetric matrix with row/column k deleted, from its inverse.
inline void remove_index(Eigen::MatrixXd& inv, Eigen::Index k) {
    const Eigen::Index n = inv.rows();
    const Eigen::VectorXd b = inv.col(k);
    inv.noalias() -= b * (b.transpose() / b(k));
    const Eigen::Index tail = n - k - 1;
    if (tail > 0) {
        inv.block(k, 0, tail, n) = inv.block(k + 1, 0, tail, n).eval();
        inv.block(0, k, n, tail) = inv.block(0, k + 1, n, tail).eval();
    }
    inv.conservativeResize(n - 1, n - 1);
}

}  // namespace detail

/// Iterative LNR test. Hyperparameters are fitted once on the full set
/// (unless given) and frozen; each iteration refits the GP on the retained
/// samples, removes the single sample with the largest |r^N| if it exceeds
/// t (ties: lowest index), and stops when none does, after
/// floor(max_iter_fraction * n) removals, or when fewer than min_samples
/// would remain.
inline ResidualReport lnr_detect(const std::vector<Vec2>& x, const std::vector<double>& y, const LnrParams& p = {},
                                 std::optional<GpHyper> hyper = std::nullopt) {
    if (x.size() != y.size()) throw Error("lnr_detect: size mismatch");
    if (x.size() < std::max<std::size_t>(p.min_samples, 1))
        throw TooFewSamples("LNR detection needs at least " + std::to_string(p.min_samples) + " samples, got " +
                            std::to_string(x.size()));
    ResidualReport rep;
    if (hyper) {
        rep.hyper = *hyper;
    } else {
        const auto fit = fit_hyperparameters(x, y, p.centre ? detail::mean_of(y) : 0.0, p.search);
        rep.hyper = fit.hyper;
        rep.hyper_defaulted = fit.defaulted;
    }
    const std::size_t n = x.size();
    const auto max_removals = static_cast<std::size_t>(std::floor(p.max_iter_fraction * static_cast<double>(n)));

    std::vector<std::size_t> keep(n);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    rep.residuals.assign(n, std::numeric_limits<double>::quiet_NaN());

    // With the covariance scale the residuals only need (K + sn^2 I)^-1, which
    // is downdated in O(n^2) per removal instead of refactorized.
    const bool downdate = p.scale == ResidualScale::ResidualCovariance;
    Eigen::MatrixXd kinv;
    if (downdate) {
        const auto model = gp_fit(x, y, rep.hyper);
        const auto ni = static_cast<Eigen::Index>(n);
        kinv = model.factor.solve(Eigen::MatrixXd::Identity(ni, ni));
    }
    for (;;) {
        std::vector<double> r;
        if (downdate) {
            const auto m = static_cast<Eigen::Index>(keep.size());
            Eigen::VectorXd yc(m);
            for (Eigen::Index k = 0; k < m; ++k) yc(k) = y[keep[static_cast<std::size_t>(k)]];
            if (p.centre) yc.array() -= yc.mean();
            const Eigen::VectorXd alpha = kinv * yc;
            r.resize(keep.size());
            for (Eigen::Index k = 0; k < m; ++k) r[static_cast<std::size_t>(k)] = alpha(k) / std::sqrt(kinv(k, k));
        } else {
            std::vector<Vec2> kx;
            std::vector<double> ky;
            for (std::size_t i : keep) {
                kx.push_back(x[i]);
                ky.push_back(y[i]);
            }
            r = normalized_residuals(gp_fit(kx, ky, rep.hyper, p.centre ? detail::mean_of(ky) : 0.0), p.scale);
        }
        ++rep.iterations;
        std::size_t arg = 0;
        for (std::size_t k = 1; k < r.size(); ++k)
            if (std::abs(r[k]) > std::abs(r[arg])) arg = k;
        for (std::size_t k = 0; k < r.size(); ++k) rep.residuals[keep[k]] = r[k];
        if (std::abs(r[arg]) <= p.t) break;
        if (rep.outliers.size() >= max_removals || keep.size() <= p.min_samples) {
            rep.converged = false;
            break;
        }
        rep.outliers.push_back(keep[arg]);
        rep.removed_r.push_back(r[arg]);
        rep.residuals[keep[arg]] = std::numeric_limits<double>::quiet_NaN();
        keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(arg));
        if (downdate) detail::remove_index(kinv, static_cast<Eigen::Index>(arg));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Database-level detection
// ---------------------------------------------------------------------------

/// Samples that take part in detection and map building (not lost, not abnormal).
inline bool trainable(const FingerprintSample& s) { return usable(s.flag); }

struct DetectionJob {
    int ap_id = 0;
    Band band = Band::B24;
    int region_id = 0;
    std::vector<std::size_t> samples;  // db sample indices used for training
    std::optional<ResidualReport> report;  // empty if too few samples

    [[nodiscard]] std::vector<std::size_t> outlier_samples() const {
        std::vector<std::size_t> out;
        if (report)
            for (std::size_t i : report->outliers) out.push_back(samples[i]);
        return out;
    }
};

/// One LNR job per (AP, band, region), in that lexicographic order.
inline std::vector<DetectionJob> detect_abnormal(const FingerprintDatabase& db, const LnrParams& p = {}) {
    std::vector<DetectionJob> jobs;
    for (int ap : db.ap_ids())
        for (Band band : kBands)
            for (int region : db.region_ids()) {
                DetectionJob job{ap, band, region, {}, std::nullopt};
                std::vector<Vec2> x;
                std::vector<double> y;
                for (std::size_t i : db.select(ap, band, region)) {
                    if (!trainable(db.samples[i])) continue;
                    job.samples.push_back(i);
                    x.push_back(db.location_of(db.samples[i]).pos);
                    y.push_back(db.samples[i].rssi);
                }
                if (x.size() >= p.min_samples) job.report = lnr_detect(x, y, p);
                jobs.push_back(std::move(job));
            }
    return jobs;
}

inline std::vector<std::size_t> all_outliers(const std::vector<DetectionJob>& jobs) {
    std::vector<std::size_t> out;
    for (const auto& j : jobs) {
        const auto o = j.outlier_samples();
        out.insert(out.end(), o.begin(), o.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Shift estimation and repair
// ---------------------------------------------------------------------------

struct ShiftEstimate {
    int ap_id = 0;
    Band band = Band::B24;
    int region_id = 0;
    double shift_db = 0.0;
    std::size_t pairs = 0;
};

namespace detail {

/// Location lookup by exact position (plans are replayed identically).
inline std::map<std::pair<double, double>, int> location_lookup(const FingerprintDatabase& db) {
    std::map<std::pair<double, double>, int> m;
    for (std::size_t i = 0; i < db.locations.size(); ++i)
        m.emplace(std::pair{db.locations[i].pos.x, db.locations[i].pos.y}, static_cast<int>(i));
    return m;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Median of (current - previous) over co-located samples of one (AP, band,
/// region). Current samples must be Measured and not in `excluded`; previous
/// samples must be usable.
inline ShiftEstimate estimate_shift(const FingerprintDatabase& current, const std::set<std::size_t>& excluded,
                                    const FingerprintDatabase& previous, int ap_id, Band band, int region_id,
                                    std::size_t min_pairs = 5) {
    const auto prev_loc = detail::location_lookup(previous);
    std::map<std::tuple<int, int, Band>, std::size_t> prev_idx = previous.key_index();
    std::vector<double> diffs;
    for (std::size_t i : current.select(ap_id, band, region_id)) {
        const auto& s = current.samples[i];
        if (s.flag != SampleFlag::Measured || excluded.count(i)) continue;
        const auto& pos = current.location_of(s).pos;
        auto lit = prev_loc.find({pos.x, pos.y});
        if (lit == prev_loc.end()) continue;
        auto sit = prev_idx.find({lit->second, ap_id, band});
        if (sit == prev_idx.end()) continue;
        const auto& ps = previous.samples[sit->second];
        if (!usable(ps.flag)) continue;
        diffs.push_back(s.rssi - ps.rssi);
    }
    if (diffs.size() < min_pairs)
        throw NoShiftAvailable("only " + std::to_string(diffs.size()) + " co-located pairs for AP " +
                               std::to_string(ap_id) + " band " + std::string(band_name(band)) + " region " +
                               std::to_string(region_id));
    return {ap_id, band, region_id, detail::median(diffs), diffs.size()};
}

struct RepairResult {
    FingerprintDatabase db;
    std::vector<int> resurvey_locations;  // location indices, ascending, unique
    std::size_t shifted = 0;
    std::vector<ShiftEstimate> shifts;
};

/// Mark outliers Abnormal, then repair them from `previous` + shift where
/// possible (RecoveredShift); every other outlier's location is queued for
/// resurvey. Samples outside the outlier set are never modified.
inline RepairResult repair_abnormal(const FingerprintDatabase& db, const std::vector<std::size_t>& outliers,
                                    const FingerprintDatabase* previous, std::size_t min_pairs = 5) {
    RepairResult out{db, {}, 0, {}};
    const std::set<std::size_t> excluded(outliers.begin(), outliers.end());
    for (std::size_t i : excluded) out.db.samples[i].flag = SampleFlag::Abnormal;

    std::set<int> resurvey;
    if (previous) {
        const auto prev_loc = detail::location_lookup(*previous);
        const auto prev_idx = previous->key_index();
        std::map<std::tuple<int, Band, int>, std::optional<double>> shift_cache;
        for (std::size_t i : excluded) {
            auto& s = out.db.samples[i];
            const auto& loc = db.location_of(s);
            const auto key = std::tuple{s.ap_id, s.band, loc.region_id};
            auto cit = shift_cache.find(key);
            if (cit == shift_cache.end()) {
                std::optional<double> shift;
                try {
                    const auto est = estimate_shift(db, excluded, *previous, s.ap_id, s.band, loc.region_id, min_pairs);
                    shift = est.shift_db;
                    out.shifts.push_back(est);
                } catch (const NoShiftAvailable&) {
                }
                cit = shift_cache.emplace(key, shift).first;
            }
            std::optional<double> prev_value;
            if (auto lit = prev_loc.find({loc.pos.x, loc.pos.y}); lit != prev_loc.end())
                if (auto sit = prev_idx.find({lit->second, s.ap_id, s.band}); sit != prev_idx.end())
                    if (usable(previous->samples[sit->second].flag)) prev_value = previous->samples[sit->second].rssi;
            if (cit->second && prev_value) {
                s.rssi = clamp_rssi(*prev_value + *cit->second);
                s.flag = SampleFlag::RecoveredShift;
                ++out.shifted;
            } else {
                resurvey.insert(s.loc);
            }
        }
    } else {
        for (std::size_t i : excluded) resurvey.insert(db.samples[i].loc);
    }
    out.resurvey_locations.assign(resurvey.begin(), resurvey.end());
    return out;
}

/// Replace Abnormal samples at resurveyed locations with the sojourn record
/// for the same (AP, band). `sojourn` holds one location per entry of
/// `locations`, in the same order.
inline void apply_resurvey(FingerprintDatabase& db, const std::vector<int>& locations,
                           const FingerprintDatabase& sojourn) {
    if (sojourn.locations.size() != locations.size()) throw Error("apply_resurvey: location count mismatch");
    const auto idx = sojourn.key_index();
    std::map<int, int> which;
    for (std::size_t k = 0; k < locations.size(); ++k) which[locations[k]] = static_cast<int>(k);
    for (auto& s : db.samples) {
        if (s.flag != SampleFlag::Abnormal) continue;
        auto w = which.find(s.loc);
        if (w == which.end()) continue;
        auto it = idx.find({w->second, s.ap_id, s.band});
        if (it == idx.end()) continue;
        const auto& r = sojourn.samples[it->second];
        if (r.flag == SampleFlag::Lost) {
            s.rssi = kRssiFloor;
            s.flag = SampleFlag::Lost;
        } else {
            s.rssi = r.rssi;
            s.flag = SampleFlag::Resurveyed;
        }
    }
}

}  // namespace auf
