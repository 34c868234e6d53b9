#pragma once

// Pipeline configuration and its JSON form. Every field has a default; a
// config file may set any subset, and unknown keys are rejected.

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "auf/anomaly.hpp"
#include "auf/fpmap.hpp"
#include "auf/localize.hpp"
#include "auf/recovery.hpp"
#include "auf/rfsim.hpp"
#include "auf/segmentation.hpp"

namespace auf {

struct InjectionParams {
    double single_band_loss_fraction = 0.0;  // of (location, AP) pairs with both bands measured
    double gross_error_fraction = 0.0;       // of measured samples
    double gross_error_db = 15.0;            // added with a random sign
};

struct EvalConfig {
    std::size_t n_points = 100;
    double step_m = 0.8;
    std::string method = "bayes";  // bayes | knn | pf-bayes | pf-knn
};

struct PipelineConfig {
    std::string fixture = "floor3-like";  // used when map_path is empty
    std::string map_path;                 // PGM with a .meta.json next to it
    int obstacle_threshold = kDefaultObstacleThreshold;
    double robot_radius_m = 0.2;
    SegmentParams segmentation;
    double cell_size_m = kDefaultCellSize;

    int n_aps = 8;
    BandParams band24 = kDefault24;
    BandParams band5 = kDefault5;
    RfWorldParams rf;
    MotionParams motion;
    PowerParams power;

    std::string mode = "no-sojourn";  // no-sojourn | sojourn
    NoSojourn no_sojourn;
    Sojourn sojourn;

    bool recover = true;
    SvrParams svr;
    bool detect = true;
    LnrParams lnr;
    std::size_t shift_min_pairs = 5;

    MapParams map;
    LocalizeParams localize;
    PfParams pf;
    EvalConfig eval;
    InjectionParams inject;

    std::uint64_t seed = 1;
    int epoch = 0;
};

namespace config_detail {

using nlohmann::json;

inline std::string_view scale_name(ResidualScale s) {
    return s == ResidualScale::Predictive ? "predictive" : "residual-covariance";
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <typename T>
    void operator()(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        const std::string at = path_.empty() ? key : path_ + "." + key;
        try {
            if constexpr (std::is_same_v<T, ResidualScale>) {
                const auto s = it->template get<std::string>();
                if (s == scale_name(ResidualScale::Predictive)) out = ResidualScale::Predictive;
                else if (s == scale_name(ResidualScale::ResidualCovariance)) out = ResidualScale::ResidualCovariance;
                else throw ConfigError(at + ": unknown residual scale '" + s + "'");
            } else if constexpr (std::is_same_v<T, std::optional<GpHyper>>) {
                if (it->is_null()) {
                    out.reset();
                } else {
                    GpHyper h;
                    Reader r(*it, at);
                    r("sigma_f", h.sigma_f);
                    r("length_scale", h.length_scale);
                    r("sigma_n", h.sigma_n);
                    r.finish();
                    out = h;
                }
            } else {
                if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>)
                    if (!it->is_number_integer()) throw ConfigError(at + ": expected an integer");
                out = it->template get<T>();
            }
        } catch (const json::exception&) {
            throw ConfigError(at + ": wrong type");
        }
    }

    template <typename F>
    void object(const char* key, F&& f) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        Reader sub(*it, path_.empty() ? key : path_ + "." + key);
        f(sub);
        sub.finish();
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
    }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

class Writer {
public:
    template <typename T>
    void operator()(const char* key, const T& v) {
        if constexpr (std::is_same_v<T, ResidualScale>) {
            j[key] = scale_name(v);
        } else if constexpr (std::is_same_v<T, std::optional<GpHyper>>) {
            if (v) j[key] = {{"sigma_f", v->sigma_f}, {"length_scale", v->length_scale}, {"sigma_n", v->sigma_n}};
            else j[key] = nullptr;
        } else {
            j[key] = v;
        }
    }

    template <typename F>
    void object(const char* key, F&& f) {
        Writer sub;
        f(sub);
        j[key] = std::move(sub.j);
    }

    json j = json::object();
};

template <typename V>
void fields(V& v, BandParams& p) {
    v("tx_power_term_dbm", p.tx_power_term);
    v("beta", p.beta);
    v("shadow_sigma_db", p.shadow_sigma);
    v("d0_m", p.d0);
}

template <typename V>
void fields(V& v, HyperSearch& p) {
    v("sigma_f_min", p.sigma_f_min);
    v("sigma_f_max", p.sigma_f_max);
    v("length_min", p.length_min);
    v("length_max", p.length_max);
    v("sigma_n_min", p.sigma_n_min);
    v("sigma_n_max", p.sigma_n_max);
    v("grid_points", p.grid_points);
    v("refine_min_step", p.refine_min_step);
    v("max_points", p.max_points);
    v("min_points", p.min_points);
}

template <typename V>
void fields(V& v, PipelineConfig& c) {
    v.object("map", [&](auto& m) {
        m("fixture", c.fixture);
        m("path", c.map_path);
        m("obstacle_threshold", c.obstacle_threshold);
        m("robot_radius_m", c.robot_radius_m);
    });
    v.object("segmentation", [&](auto& s) {
        s("quantization_m", c.segmentation.quantization_m);
        s("overlap_threshold", c.segmentation.overlap_threshold);
        s("value_tolerance_m", c.segmentation.value_tolerance_m);
        s("min_region_area_m2", c.segmentation.min_region_area_m2);
    });
    v("cell_size_m", c.cell_size_m);
    v.object("world", [&](auto& w) {
        w("n_aps", c.n_aps);
        w.object("band24", [&](auto& b) { fields(b, c.band24); });
        w.object("band5", [&](auto& b) { fields(b, c.band5); });
        w.object("loss", [&](auto& l) {
            l("p_floor", c.rf.loss.p_floor);
            l("rssi_50_dbm", c.rf.loss.rssi_50);
            l("slope_db", c.rf.loss.slope);
        });
        w.object("temporal", [&](auto& t) {
            t("mean_stable_s", c.rf.temporal.mean_stable_s);
            t("epoch_shift_sigma_db", c.rf.temporal.epoch_shift_sigma);
        });
        w.object("shadow", [&](auto& s) {
            s("correlation_length_m", c.rf.shadow.correlation_length_m);
            s("band_correlation", c.rf.shadow.band_correlation);
            s("lattice_step_m", c.rf.shadow.lattice_step_m);
            s("temporal_fraction", c.rf.shadow.temporal_fraction);
            s("measurement_fraction", c.rf.shadow.measurement_fraction);
        });
    });
    v.object("motion", [&](auto& m) {
        m("v_max_mps", c.motion.v_max);
        m("accel_mps2", c.motion.accel);
        m("turn_rate_radps", c.motion.turn_rate);
        m("waypoint_handoff_s", c.motion.waypoint_handoff_s);
    });
    v.object("power", [&](auto& p) {
        p("drive_w", c.power.drive_w);
        p("idle_w", c.power.idle_w);
        p("accel_wh", c.power.accel_wh);
        p("laser_w", c.power.laser_w);
        p("laptop_w", c.power.laptop_w);
    });
    v.object("survey", [&](auto& s) {
        s("mode", c.mode);
        s("scan_interval_s", c.no_sojourn.scan_interval_s);
        s("dwell_s", c.sojourn.dwell_s);
        s("scans_per_stop", c.sojourn.scans_per_stop);
    });
    v.object("recovery", [&](auto& r) {
        r("enabled", c.recover);
        r("C", c.svr.C);
        r("epsilon_db", c.svr.epsilon_db);
        r("gamma", c.svr.gamma);
        r("min_samples", c.svr.min_samples);
        r("tolerance", c.svr.tolerance);
        r("max_sweeps", c.svr.max_sweeps);
    });
    v.object("detection", [&](auto& d) {
        d("enabled", c.detect);
        d("t", c.lnr.t);
        d("max_iter_fraction", c.lnr.max_iter_fraction);
        d("min_samples", c.lnr.min_samples);
        d("centre", c.lnr.centre);
        d("residual_scale", c.lnr.scale);
        d("shift_min_pairs", c.shift_min_pairs);
    });
    v.object("gp", [&](auto& g) {
        g.object("search", [&](auto& s) { fields(s, c.lnr.search); });
        g("fixed_hyper", c.map.fixed_hyper);
        g("include_lost", c.map.include_lost);
    });
    v.object("localization", [&](auto& l) {
        l("k", c.localize.k);
        l("knn_weighted", c.localize.knn_weighted);
        l("obs_noise_db", c.localize.obs_noise_db);
        l.object("particle_filter", [&](auto& p) {
            p("n_particles", c.pf.n_particles);
            p("motion_std_m", c.pf.motion_std_m);
            p("knn_snap_sigma_m", c.pf.knn_snap_sigma_m);
            p("lookup_resolution_m", c.pf.lookup_resolution_m);
            p("max_motion_tries", c.pf.max_motion_tries);
        });
    });
    v.object("eval", [&](auto& e) {
        e("n_points", c.eval.n_points);
        e("step_m", c.eval.step_m);
        e("method", c.eval.method);
    });
    v.object("inject", [&](auto& i) {
        i("single_band_loss_fraction", c.inject.single_band_loss_fraction);
        i("gross_error_fraction", c.inject.gross_error_fraction);
        i("gross_error_db", c.inject.gross_error_db);
    });
    v("seed", c.seed);
    v("epoch", c.epoch);
}

}  // namespace config_detail

inline void validate(const PipelineConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.mode == "no-sojourn" || c.mode == "sojourn", "survey.mode must be no-sojourn or sojourn");
    parse_method(c.eval.method);
    require(c.n_aps >= 1, "world.n_aps must be >= 1");
    require(c.cell_size_m > 0, "cell_size_m must be > 0");
    require(c.robot_radius_m >= 0, "map.robot_radius_m must be >= 0");
    require(c.obstacle_threshold >= 0 && c.obstacle_threshold <= 255, "map.obstacle_threshold must be in [0, 255]");
    require(c.segmentation.quantization_m > 0, "segmentation.quantization_m must be > 0");
    require(c.eval.n_points >= 1 && c.eval.step_m > 0, "eval needs n_points >= 1 and step_m > 0");
    require(c.localize.k >= 1, "localization.k must be >= 1");
    require(c.localize.obs_noise_db >= 0, "localization.obs_noise_db must be >= 0");
    require(c.pf.n_particles >= 100, "localization.particle_filter.n_particles must be >= 100");
    require(c.lnr.t > 0 && c.lnr.max_iter_fraction >= 0 && c.lnr.max_iter_fraction <= 1,
            "detection needs t > 0 and max_iter_fraction in [0, 1]");
    require(c.svr.C > 0 && c.svr.epsilon_db >= 0 && c.svr.gamma >= 0, "recovery needs C > 0, epsilon >= 0, gamma >= 0");
    const auto& rf = c.rf;
    require(rf.loss.p_floor >= 0 && rf.loss.p_floor < 1 && rf.loss.slope > 0,
            "world.loss needs p_floor in [0, 1) and slope_db > 0");
    require(rf.temporal.mean_stable_s > 0 && rf.temporal.epoch_shift_sigma >= 0,
            "world.temporal needs mean_stable_s > 0 and epoch_shift_sigma_db >= 0");
    require(std::abs(rf.shadow.band_correlation) <= 1 && rf.shadow.temporal_fraction >= 0 &&
                rf.shadow.measurement_fraction >= 0 && rf.shadow.temporal_fraction + rf.shadow.measurement_fraction <= 1,
            "world.shadow fractions must be >= 0 with sum <= 1 and |band_correlation| <= 1");
    for (double f : {c.inject.single_band_loss_fraction, c.inject.gross_error_fraction})
        require(f >= 0 && f <= 1, "inject fractions must be in [0, 1]");
    const auto& s = c.lnr.search;
    require(s.sigma_f_min > 0 && s.sigma_f_min <= s.sigma_f_max && s.length_min > 0 && s.length_min <= s.length_max &&
                s.sigma_n_min > 0 && s.sigma_n_min <= s.sigma_n_max && s.grid_points >= 1,
            "gp.search bounds must be positive and ordered");
    if (c.map.fixed_hyper)
        require(c.map.fixed_hyper->sigma_f > 0 && c.map.fixed_hyper->length_scale > 0 && c.map.fixed_hyper->sigma_n > 0,
                "gp.fixed_hyper entries must be > 0");
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    config_detail::Reader r(j, "");
    config_detail::fields(r, c);
    r.finish();
    c.map.search = c.lnr.search;
    validate(c);
    return c;
}

inline nlohmann::json config_to_json(PipelineConfig c) {
    config_detail::Writer w;
    config_detail::fields(w, c);
    return w.j;
}

inline PipelineConfig load_config(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config " + p.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + p.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace auf
