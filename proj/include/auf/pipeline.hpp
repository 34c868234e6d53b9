#pragma once

// End-to-end run: floor -> segmentation -> plan -> world -> survey -> fault
// injection -> lost-signal recovery -> abnormal detection -> repair or
// resurvey -> GP map -> localization error on a random walk.

#include <chrono>
#include <filesystem>
#include <optional>

#include "auf/config.hpp"
#include "auf/fixtures.hpp"
#include "auf/hash.hpp"
#include "auf/io.hpp"

namespace auf {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Stage { Config, Map, Segment, Plan, Survey, Recover, Detect, Repair, BuildMap, Eval, Output };

inline std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Config: return "config";
        case Stage::Map: return "map";
        case Stage::Segment: return "segment";
        case Stage::Plan: return "plan";
        case Stage::Survey: return "survey";
        case Stage::Recover: return "recover";
        case Stage::Detect: return "detect";
        case Stage::Repair: return "repair";
        case Stage::BuildMap: return "build-map";
        case Stage::Eval: return "eval";
        case Stage::Output: return "output";
    }
    return "?";
}

/// Process exit code for a failure in `s`.
inline int exit_code(Stage s) {
    switch (s) {
        case Stage::Config: return 2;
        case Stage::Map: return 3;
        case Stage::Output: return 4;
        case Stage::Segment: return 10;
        case Stage::Plan: return 11;
        case Stage::Survey: return 12;
        case Stage::Recover: return 13;
        case Stage::Detect: return 14;
        case Stage::Repair: return 15;
        case Stage::BuildMap: return 16;
        case Stage::Eval: return 17;
    }
    return 1;
}

class StageError : public Error {
public:
    StageError(Stage s, const std::string& what) : Error(std::string(stage_name(s)) + ": " + what), stage(s) {}
    Stage stage;
};

/// Runs `f`, rethrowing any failure tagged with the stage.
template <typename F>
auto in_stage(Stage s, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(s, e.what());
    }
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name) {
    return hash_combine(splitmix64(seed), hash_string(name));
}

// ---------------------------------------------------------------------------
// Floor and world
// ---------------------------------------------------------------------------

struct Floor {
    OccupancyGrid grid;
    BinaryGrid inflated;
    SegmentedMap seg;
    SurveyPlan plan;
    std::vector<ReferencePoint> refs;
};

inline OccupancyGrid load_floor_grid(const PipelineConfig& c) {
    if (c.map_path.empty()) return fixtures::by_name(c.fixture);
    return load_grid(c.map_path);
}

inline BinaryGrid inflated_free_space(const OccupancyGrid& grid, const PipelineConfig& c) {
    return inflate_obstacles(threshold_obstacles(grid, c.obstacle_threshold), c.robot_radius_m);
}

inline Floor prepare_floor(const PipelineConfig& c) {
    Floor f;
    f.grid = in_stage(Stage::Map, [&] { return load_floor_grid(c); });
    f.inflated = in_stage(Stage::Map, [&] { return inflated_free_space(f.grid, c); });
    f.seg = in_stage(Stage::Segment, [&] { return segment(distance_transform(f.inflated), c.segmentation); });
    f.plan = in_stage(Stage::Plan, [&] { return plan_survey(f.seg, f.inflated, c.cell_size_m); });
    f.refs = reference_points(f.plan);
    return f;
}

inline RfWorld pipeline_world(const PipelineConfig& c, const BinaryGrid& inflated) {
    return make_world(inflated, c.n_aps, stream_seed(c.seed, "world"), c.rf, c.band24, c.band5);
}

inline SurveyMode survey_mode(const PipelineConfig& c) {
    if (c.mode == "sojourn") return c.sojourn;
    return c.no_sojourn;
}

// ---------------------------------------------------------------------------
// Fault injection
// ---------------------------------------------------------------------------

struct InjectionLog {
    std::size_t single_band_lost = 0;
    std::vector<std::size_t> gross;  // sample indices
};

/// Knock out one band of a fraction of fully measured (location, AP) pairs,
/// then add +-gross_error_db to a fraction of the remaining measured samples.
inline InjectionLog inject_faults(FingerprintDatabase& db, const InjectionParams& p, Rng& rng) {
    InjectionLog log;
    if (p.single_band_loss_fraction > 0) {
        const auto idx = db.key_index();
        for (const auto& [key, i24] : idx) {
            const auto& [loc, ap, band] = key;
            if (band != Band::B24) continue;
            const auto it5 = idx.find({loc, ap, Band::B5});
            if (it5 == idx.end()) continue;
            auto& a = db.samples[i24];
            auto& b = db.samples[it5->second];
            if (a.flag != SampleFlag::Measured || b.flag != SampleFlag::Measured) continue;
            const double u = rng.uniform();
            const bool pick5 = rng.uniform() < 0.5;
            if (u >= p.single_band_loss_fraction) continue;
            auto& victim = pick5 ? b : a;
            victim.flag = SampleFlag::Lost;
            victim.rssi = kRssiFloor;
            ++log.single_band_lost;
        }
    }
    if (p.gross_error_fraction > 0) {
        for (std::size_t i = 0; i < db.samples.size(); ++i) {
            auto& s = db.samples[i];
            if (s.flag != SampleFlag::Measured) continue;
            const double u = rng.uniform();
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            if (u >= p.gross_error_fraction) continue;
            s.rssi = clamp_rssi(s.rssi + sign * p.gross_error_db);
            log.gross.push_back(i);
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Stage helpers shared by the pipeline and the command-line tool
// ---------------------------------------------------------------------------

struct SurveyOutcome {
    FingerprintDatabase db;  // after fault injection
    TimeEnergyReport report;
    InjectionLog injection;
};

inline SurveyOutcome survey_stage(const PipelineConfig& c, const RfWorld& world, const SurveyPlan& plan) {
    Rng rng = Rng::stream(c.seed, "survey-epoch-" + std::to_string(c.epoch));
    auto res = simulate_survey(world, plan, survey_mode(c), c.motion, c.power, rng, c.epoch);
    Rng inj = Rng::stream(c.seed, "inject-epoch-" + std::to_string(c.epoch));
    SurveyOutcome out{std::move(res.db), res.report, {}};
    out.injection = inject_faults(out.db, c.inject, inj);
    return out;
}

struct RepairOutcome {
    FingerprintDatabase db;
    std::size_t shifted = 0;
    std::vector<ShiftEstimate> shifts;
    std::vector<int> resurvey_locations;
    TimeEnergyReport resurvey_report;
};

/// Shift repair against `previous` where possible; the remaining flagged
/// locations are resurveyed with sojourn, starting from the end of the
/// route at `start_time_s`.
inline RepairOutcome repair_stage(const PipelineConfig& c, const RfWorld& world, const SurveyPlan& plan,
                                  const FingerprintDatabase& db, const std::vector<std::size_t>& outliers,
                                  const FingerprintDatabase* previous, double start_time_s) {
    auto rep = repair_abnormal(db, outliers, previous, c.shift_min_pairs);
    RepairOutcome out{std::move(rep.db), rep.shifted, std::move(rep.shifts), std::move(rep.resurvey_locations), {}};
    if (out.resurvey_locations.empty()) return out;
    std::vector<ScanLocation> targets;
    for (int l : out.resurvey_locations) targets.push_back(out.db.locations[static_cast<std::size_t>(l)]);
    const auto wps = plan.flatten();
    const Vec2 start = wps.empty() ? targets.front().pos : wps.back().pos;
    Rng rng = Rng::stream(c.seed, "resurvey-epoch-" + std::to_string(c.epoch));
    const auto res =
        resurvey_with_sojourn(world, targets, start, start_time_s, c.sojourn, c.motion, c.power, rng, c.epoch);
    out.resurvey_report = res.report;
    apply_resurvey(out.db, out.resurvey_locations, res.db);
    return out;
}

inline std::vector<Vec2> eval_trajectory(const PipelineConfig& c, const BinaryGrid& free) {
    Rng walk = Rng::stream(c.seed, "eval-walk");
    return random_walk(free, c.eval.n_points, c.eval.step_m, walk);
}

inline ErrorStats eval_stage(const PipelineConfig& c, const FingerprintMap& map, const RfWorld& world,
                             const BinaryGrid& free, const std::vector<Vec2>& trajectory) {
    EvalParams ep{c.localize, c.pf, c.no_sojourn.scan_interval_s, c.epoch};
    return evaluate(map, world, free, trajectory, parse_method(c.eval.method), stream_seed(c.seed, "eval"), ep);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct PipelineResult {
    PipelineConfig config;
    Floor floor;
    std::optional<RfWorld> world;
    FingerprintDatabase surveyed;   // survey output after fault injection
    FingerprintDatabase recovered;  // after lost-signal recovery (detection input)
    FingerprintDatabase final_db;
    InjectionLog injection;
    RecoveryStats recovery;
    std::vector<DetectionJob> jobs;
    std::vector<std::size_t> outliers;
    std::vector<int> resurvey_locations;
    std::size_t shifted = 0;
    std::vector<ShiftEstimate> shifts;
    TimeEnergyReport survey_report;
    TimeEnergyReport resurvey_report;
    FingerprintMap map;
    std::vector<Vec2> trajectory;
    ErrorStats eval;
    std::vector<std::pair<std::string, double>> timings;  // stage, seconds

    [[nodiscard]] TimeEnergyReport total_report() const {
        auto r = survey_report;
        r += resurvey_report;
        return r;
    }
};

inline nlohmann::json report_json(const PipelineResult& r) {
    nlohmann::json j;
    j["mode"] = r.config.mode;
    j["epoch"] = r.config.epoch;
    j["seed"] = r.config.seed;
    j["survey"] = io::time_energy_json(r.survey_report);
    j["resurvey"] = io::time_energy_json(r.resurvey_report);
    j["total"] = io::time_energy_json(r.total_report());
    j["counts"] = {{"regions", r.floor.seg.regions.size()},
                   {"waypoints", r.floor.refs.size()},
                   {"locations", r.final_db.locations.size()},
                   {"samples", r.final_db.samples.size()},
                   {"injected_single_band_loss", r.injection.single_band_lost},
                   {"injected_gross_errors", r.injection.gross.size()},
                   {"recovered_dual", r.recovery.recovered},
                   {"dual_lost", r.recovery.dual_lost},
                   {"outliers", r.outliers.size()},
                   {"shift_repaired", r.shifted},
                   {"resurveyed_samples", r.resurvey_locations.empty() ? 0 : r.outliers.size() - r.shifted},
                   {"resurveyed_locations", r.resurvey_locations.size()},
                   {"imputed_map_groups", r.map.imputed.size()}};
    nlohmann::json shifts = nlohmann::json::array();
    for (const auto& s : r.shifts)
        shifts.push_back({{"ap_id", s.ap_id}, {"band", band_name(s.band)}, {"region_id", s.region_id},
                          {"shift_db", s.shift_db}, {"pairs", s.pairs}});
    j["shifts"] = shifts;
    j["localization"] = io::error_stats_json(r.eval);
    j["localization"]["method"] = r.config.eval.method;
    return j;
}

/// Runs every stage. `previous` (an earlier epoch's final database on the
/// same route) switches repair to the shift branch. With `out_dir`, all
/// artifacts and a manifest are written there; a failing stage still writes
/// the manifest for the stages that finished.
inline PipelineResult run_pipeline(const PipelineConfig& c, const FingerprintDatabase* previous = nullptr,
                                   const std::filesystem::path* out_dir = nullptr) {
    PipelineResult r;
    r.config = c;
    using clock = std::chrono::steady_clock;
    auto timed = [&](Stage s, auto&& f) {
        const auto t0 = clock::now();
        in_stage(s, f);
        r.timings.emplace_back(stage_name(s), std::chrono::duration<double>(clock::now() - t0).count());
    };
    std::optional<StageError> failure;
    try {
        in_stage(Stage::Config, [&] { validate(c); });
        timed(Stage::Plan, [&] { r.floor = prepare_floor(c); });
        timed(Stage::Survey, [&] {
            r.world.emplace(pipeline_world(c, r.floor.inflated));
            auto res = survey_stage(c, *r.world, r.floor.plan);
            r.survey_report = res.report;
            r.injection = std::move(res.injection);
            r.surveyed = std::move(res.db);
        });
        FingerprintDatabase db = r.surveyed;
        timed(Stage::Recover, [&] {
            if (c.recover) db = recover_lost(db, fit_recovery(db, c.svr), &r.recovery);
            r.recovered = db;
        });
        timed(Stage::Detect, [&] {
            if (c.detect) {
                r.jobs = detect_abnormal(db, c.lnr);
                r.outliers = all_outliers(r.jobs);
            }
        });
        timed(Stage::Repair, [&] {
            if (r.outliers.empty()) return;
            auto rep = repair_stage(c, *r.world, r.floor.plan, db, r.outliers, previous, r.survey_report.duration_s);
            db = std::move(rep.db);
            r.shifted = rep.shifted;
            r.shifts = std::move(rep.shifts);
            r.resurvey_locations = std::move(rep.resurvey_locations);
            r.resurvey_report = rep.resurvey_report;
        });
        r.final_db = std::move(db);
        timed(Stage::BuildMap, [&] {
            const auto hypers = hypers_from(r.jobs);
            r.map = build_map(r.final_db, r.floor.refs, c.map, hypers.empty() ? nullptr : &hypers);
        });
        timed(Stage::Eval, [&] {
            r.trajectory = eval_trajectory(c, r.floor.inflated);
            r.eval = eval_stage(c, r.map, *r.world, r.floor.inflated, r.trajectory);
        });
    } catch (const StageError& e) {
        failure = e;
    }

    if (out_dir) {
        in_stage(Stage::Output, [&] {
            namespace fs = std::filesystem;
            fs::create_directories(*out_dir);
            nlohmann::json artifacts = nlohmann::json::object();
            auto emit = [&](const std::string& name, const std::string& text) {
                io::write_text(*out_dir / name, text);
                artifacts[name] = sha256_hex(text);
            };
            const std::size_t done = r.timings.size();
            if (done >= 1) {
                emit("segmentation.json", io::segmentation_json(r.floor.seg).dump(2) + "\n");
                emit("plan.jsonl", io::plan_to_jsonl(r.floor.plan));
            }
            if (done >= 2) emit("db_surveyed.csv", io::db_to_csv(r.surveyed));
            if (done >= 4 && c.detect) emit("detect.json", io::detection_json(r.recovered, r.jobs).dump(2) + "\n");
            if (done >= 5) emit("db.csv", io::db_to_csv(r.final_db));
            if (done >= 6) emit("map.csv", io::map_to_csv(r.map));
            if (done >= 7) {
                emit("report.json", report_json(r).dump(2) + "\n");
                emit("cdf.csv", io::cdf_csv(r.eval));
            }
            const auto cfg_text = config_to_json(c).dump(2) + "\n";
            emit("config.json", cfg_text);
            nlohmann::json stages = nlohmann::json::array();
            for (const auto& [name, sec] : r.timings) stages.push_back({{"stage", name}, {"seconds", sec}});
            nlohmann::json manifest{{"version", kVersion},
                                    {"config_sha256", sha256_hex(cfg_text)},
                                    {"seed", c.seed},
                                    {"epoch", c.epoch},
                                    {"previous_db", previous != nullptr},
                                    {"stages", stages},
                                    {"artifacts", artifacts}};
            if (failure) manifest["error"] = {{"stage", stage_name(failure->stage)}, {"message", failure->what()}};
            io::write_text(*out_dir / "manifest.json", manifest.dump(2) + "\n");
        });
    }
    if (failure) throw *failure;
    return r;
}

// ---------------------------------------------------------------------------
// Mode comparison
// ---------------------------------------------------------------------------

// Ratios compare the two surveys. Resurvey of flagged locations after AuF
// detection is kept apart and reported as an overhead.
struct ComparisonReport {
    TimeEnergyReport auf;
    TimeEnergyReport baseline;
    TimeEnergyReport auf_resurvey;
    ErrorStats auf_eval;
    ErrorStats baseline_eval;

    [[nodiscard]] double duration_ratio() const { return auf.duration_s / baseline.duration_s; }
    [[nodiscard]] double energy_ratio() const { return auf.total_wh() / baseline.total_wh(); }
    [[nodiscard]] double duration_ratio_with_resurvey() const {
        return (auf.duration_s + auf_resurvey.duration_s) / baseline.duration_s;
    }
    [[nodiscard]] double energy_ratio_with_resurvey() const {
        return (auf.total_wh() + auf_resurvey.total_wh()) / baseline.total_wh();
    }
};

/// AuF (survey without sojourn + recovery + detection/repair) against the
/// stop-and-scan baseline on the same floor, world and evaluation walk.
inline PipelineConfig auf_config(PipelineConfig c) {
    c.mode = "no-sojourn";
    c.recover = true;
    c.detect = true;
    return c;
}

inline PipelineConfig baseline_config(PipelineConfig c) {
    c.mode = "sojourn";
    c.recover = false;
    c.detect = false;
    return c;
}

inline ComparisonReport compare_modes(const PipelineConfig& c, bool evaluate_localization = true) {
    ComparisonReport rep;
    auto run = [&](const PipelineConfig& cfg, TimeEnergyReport& te, ErrorStats& st, TimeEnergyReport* resurvey) {
        if (evaluate_localization) {
            const auto r = run_pipeline(cfg);
            te = r.survey_report;
            if (resurvey) *resurvey = r.resurvey_report;
            st = r.eval;
        } else {
            const auto floor = prepare_floor(cfg);
            const auto world = pipeline_world(cfg, floor.inflated);
            te = in_stage(Stage::Survey, [&] { return survey_stage(cfg, world, floor.plan).report; });
        }
    };
    run(auf_config(c), rep.auf, rep.auf_eval, &rep.auf_resurvey);
    run(baseline_config(c), rep.baseline, rep.baseline_eval, nullptr);
    return rep;
}

inline nlohmann::json comparison_json(const ComparisonReport& r, bool with_localization = true) {
    nlohmann::json j{{"auf", io::time_energy_json(r.auf)},
                     {"baseline", io::time_energy_json(r.baseline)},
                     {"duration_ratio", r.duration_ratio()},
                     {"energy_ratio", r.energy_ratio()},
                     {"time_saving", 1.0 - r.duration_ratio()},
                     {"energy_saving", 1.0 - r.energy_ratio()}};
    if (with_localization) {
        j["auf_resurvey"] = io::time_energy_json(r.auf_resurvey);
        j["duration_ratio_with_resurvey"] = r.duration_ratio_with_resurvey();
        j["energy_ratio_with_resurvey"] = r.energy_ratio_with_resurvey();
        j["auf"]["localization"] = io::error_stats_json(r.auf_eval);
        j["baseline"]["localization"] = io::error_stats_json(r.baseline_eval);
    }
    return j;
}

}  // namespace auf
