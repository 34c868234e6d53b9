// Command-line front end. Each subcommand runs one stage from artifacts on
// disk (or regenerates its inputs from the config), so a run can be resumed
// at any stage boundary. `demo` runs everything.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "auf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace auf;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

PipelineConfig load(const Globals& g) {
    return in_stage(Stage::Config, [&] {
        PipelineConfig c = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
        if (g.seed) c.seed = *g.seed;
        validate(c);
        return c;
    });
}

fs::path out_dir(const Globals& g) {
    const fs::path p(g.out);
    in_stage(Stage::Output, [&] { fs::create_directories(p); });
    return p;
}

void emit(const fs::path& dir, const std::string& name, const std::string& text) {
    in_stage(Stage::Output, [&] { io::write_text(dir / name, text); });
    std::cout << (dir / name).string() << '\n';
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Input path: explicit flag, else the default artifact name in the output dir.
fs::path input(const std::string& flag, const fs::path& dir, const char* fallback) {
    return flag.empty() ? dir / fallback : fs::path(flag);
}

FingerprintDatabase load_db(Stage s, const fs::path& p) {
    return in_stage(s, [&] { return io::db_from_csv(io::read_text(p)); });
}

json load_json(Stage s, const fs::path& p) {
    return in_stage(s, [&] { return json::parse(io::read_text(p)); });
}

double survey_end_time(const FingerprintDatabase& db) {
    double t = 0.0;
    for (const auto& l : db.locations) t = std::max(t, l.t);
    return t;
}

Observation load_observation(const fs::path& p) {
    // ap_id,band,rssi_dbm per line; rssi "lost" or empty means not heard.
    Observation obs;
    for (const auto& line : io::lines_of(io::read_text(p))) {
        if (line.empty() || line.rfind("ap_id", 0) == 0) continue;
        const auto f = io::split(line);
        if (f.size() != 3) throw ParseError("observation line needs ap_id,band,rssi_dbm: " + line);
        const bool lost = f[2].empty() || f[2] == "lost";
        obs.push_back({io::parse_int(f[0], "ap_id"), parse_band(f[1]), lost ? kRssiFloor : io::parse_double(f[2], "rssi_dbm")});
    }
    if (obs.empty()) throw ParseError("observation file has no readings");
    return obs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Autonomous WiFi fingerprint survey: planning, simulation, recovery, mapping and localization"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    Globals g;
    app.add_option("--config", g.config_path, "JSON config (missing keys take defaults)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    std::string db_path, detect_path, previous_path, survey_path, map_path, obs_path, method;

    auto* seg = app.add_subcommand("segment", "Segment the floor map into regions");
    auto* plan = app.add_subcommand("plan", "Plan the survey route");
    auto* survey = app.add_subcommand("survey", "Simulate the survey (config survey.mode)");
    auto* recover = app.add_subcommand("recover", "Recover single-band lost signals");
    recover->add_option("--db", db_path, "Input database (default <out>/db_surveyed.csv)");
    auto* detect = app.add_subcommand("detect", "Detect abnormal samples");
    detect->add_option("--db", db_path, "Input database (default <out>/db_recovered.csv)");
    auto* repair = app.add_subcommand("repair", "Repair abnormal samples by shift or resurvey");
    repair->add_option("--db", db_path, "Input database (default <out>/db_recovered.csv)");
    repair->add_option("--detect", detect_path, "Detection report (default <out>/detect.json)");
    repair->add_option("--previous", previous_path, "Previous epoch's database; enables shift repair");
    repair->add_option("--survey", survey_path, "Survey report giving the resurvey start time (default <out>/survey.json)");
    auto* build = app.add_subcommand("build-map", "Build the GP fingerprint map");
    build->add_option("--db", db_path, "Input database (default <out>/db.csv)");
    build->add_option("--detect", detect_path, "Reuse hyperparameters from a detection report (default <out>/detect.json if present)");
    auto* localize = app.add_subcommand("localize", "Localize one scan against a map");
    localize->add_option("--map", map_path, "Map CSV (default <out>/map.csv)");
    localize->add_option("--obs", obs_path, "Scan CSV: ap_id,band,rssi_dbm")->required()->check(CLI::ExistingFile);
    localize->add_option("--method", method, "bayes | knn (default: config eval.method)");
    auto* eval = app.add_subcommand("eval", "Localization error on a simulated walk");
    eval->add_option("--map", map_path, "Map CSV (default <out>/map.csv)");
    eval->add_option("--method", method, "bayes | knn | pf-bayes | pf-knn (default: config eval.method)");
    auto* demo = app.add_subcommand("demo", "Run the whole pipeline and write every artifact");
    demo->add_option("--previous", previous_path, "Previous epoch's database; enables shift repair");
    auto* compare = app.add_subcommand("compare", "Survey without sojourn against the stop-and-scan baseline");
    bool no_loc = false;
    compare->add_flag("--no-localization", no_loc, "Compare survey time and energy only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        PipelineConfig c = load(g);
        if (!method.empty()) {
            in_stage(Stage::Config, [&] { parse_method(method); });
            c.eval.method = method;
        }
        const fs::path dir = out_dir(g);
        auto floor = [&] { return prepare_floor(c); };
        auto world = [&](const Floor& f) { return in_stage(Stage::Survey, [&] { return pipeline_world(c, f.inflated); }); };

        if (*seg) {
            const auto f = floor();
            emit(dir, "segmentation.json", pretty(io::segmentation_json(f.seg)));
            in_stage(Stage::Output, [&] {
                std::ofstream out(dir / "regions.pgm", std::ios::binary);
                write_pgm(out, f.seg.geom.width, f.seg.geom.height, label_gray(f.seg));
            });
            std::cout << (dir / "regions.pgm").string() << '\n';
        } else if (*plan) {
            const auto f = floor();
            emit(dir, "plan.jsonl", io::plan_to_jsonl(f.plan));
        } else if (*survey) {
            const auto f = floor();
            const auto w = world(f);
            const auto res = in_stage(Stage::Survey, [&] { return survey_stage(c, w, f.plan); });
            emit(dir, "db_surveyed.csv", io::db_to_csv(res.db));
            json rep = io::time_energy_json(res.report);
            rep["mode"] = c.mode;
            rep["injected_single_band_loss"] = res.injection.single_band_lost;
            rep["injected_gross_errors"] = res.injection.gross.size();
            emit(dir, "survey.json", pretty(rep));
        } else if (*recover) {
            const auto db = load_db(Stage::Recover, input(db_path, dir, "db_surveyed.csv"));
            RecoveryStats stats;
            const auto out = in_stage(Stage::Recover, [&] { return recover_lost(db, fit_recovery(db, c.svr), &stats); });
            emit(dir, "db_recovered.csv", io::db_to_csv(out));
            emit(dir, "recover.json", pretty({{"recovered_dual", stats.recovered}, {"dual_lost", stats.dual_lost}}));
        } else if (*detect) {
            const auto db = load_db(Stage::Detect, input(db_path, dir, "db_recovered.csv"));
            const auto jobs = in_stage(Stage::Detect, [&] { return detect_abnormal(db, c.lnr); });
            emit(dir, "detect.json", pretty(io::detection_json(db, jobs)));
        } else if (*repair) {
            const auto db = load_db(Stage::Repair, input(db_path, dir, "db_recovered.csv"));
            const auto outliers =
                in_stage(Stage::Repair, [&] { return io::outliers_from_detection(load_json(Stage::Repair, input(detect_path, dir, "detect.json"))); });
            std::optional<FingerprintDatabase> prev;
            if (!previous_path.empty()) prev = load_db(Stage::Repair, previous_path);
            // Without a survey report the last scan time is the best guess; it misses the final stop.
            const fs::path sp = input(survey_path, dir, "survey.json");
            const double start = fs::exists(sp) ? in_stage(Stage::Repair, [&] {
                return load_json(Stage::Repair, sp).at("duration_s").get<double>();
            })
                                                : survey_end_time(db);
            const auto f = floor();
            const auto w = world(f);
            const auto rep = in_stage(Stage::Repair, [&] {
                return repair_stage(c, w, f.plan, db, outliers, prev ? &*prev : nullptr, start);
            });
            emit(dir, "db.csv", io::db_to_csv(rep.db));
            emit(dir, "repair.json", pretty({{"outliers", outliers.size()},
                                             {"shift_repaired", rep.shifted},
                                             {"resurveyed_locations", rep.resurvey_locations.size()},
                                             {"resurvey", io::time_energy_json(rep.resurvey_report)}}));
        } else if (*build) {
            const auto db = load_db(Stage::BuildMap, input(db_path, dir, "db.csv"));
            std::map<GroupKey, GpHyper> hypers;
            const fs::path dp = input(detect_path, dir, "detect.json");
            if (!detect_path.empty() || fs::exists(dp))
                hypers = in_stage(Stage::BuildMap, [&] { return io::hypers_from_detection(load_json(Stage::BuildMap, dp)); });
            const auto f = floor();
            const auto m = in_stage(Stage::BuildMap,
                                    [&] { return build_map(db, f.refs, c.map, hypers.empty() ? nullptr : &hypers); });
            emit(dir, "map.csv", io::map_to_csv(m));
        } else if (*localize) {
            const auto m = in_stage(Stage::Eval, [&] { return io::map_from_csv(io::read_text(input(map_path, dir, "map.csv"))); });
            const auto obs = in_stage(Stage::Eval, [&] { return load_observation(obs_path); });
            const auto how = parse_method(c.eval.method);
            const Vec2 p = in_stage(Stage::Eval, [&] {
                if (how == LocMethod::Bayes) return bayes_localize(m, obs, c.localize).pos;
                if (how == LocMethod::Knn) return knn_localize(m, obs, c.localize);
                throw ConfigError("localize handles single scans; use bayes or knn");
            });
            std::cout << json{{"method", c.eval.method}, {"x_m", p.x}, {"y_m", p.y}}.dump() << '\n';
        } else if (*eval) {
            const auto m = in_stage(Stage::Eval, [&] { return io::map_from_csv(io::read_text(input(map_path, dir, "map.csv"))); });
            const auto f = floor();
            const auto w = world(f);
            const auto stats = in_stage(Stage::Eval, [&] {
                return eval_stage(c, m, w, f.inflated, eval_trajectory(c, f.inflated));
            });
            json j = io::error_stats_json(stats);
            j["method"] = c.eval.method;
            emit(dir, "eval.json", pretty(j));
            emit(dir, "cdf.csv", io::cdf_csv(stats));
            std::printf("mean %.3f m  max %.3f m\n", stats.mean_m, stats.max_m);
        } else if (*demo) {
            std::optional<FingerprintDatabase> prev;
            if (!previous_path.empty()) prev = load_db(Stage::Repair, previous_path);
            const auto r = run_pipeline(c, prev ? &*prev : nullptr, &dir);
            std::printf("outliers %zu  resurveyed %zu  shift-repaired %zu\n", r.outliers.size(),
                        r.resurvey_locations.size(), r.shifted);
            std::printf("survey %.0f s  %.1f Wh;  localization (%s) mean %.3f m  max %.3f m\n", r.survey_report.duration_s,
                        r.survey_report.total_wh(), c.eval.method.c_str(), r.eval.mean_m, r.eval.max_m);
            std::cout << (dir / "manifest.json").string() << '\n';
        } else if (*compare) {
            const auto rep = compare_modes(c, !no_loc);
            emit(dir, "compare.json", pretty(comparison_json(rep, !no_loc)));
            std::printf("duration ratio %.3f  energy ratio %.3f\n", rep.duration_ratio(), rep.energy_ratio());
            if (!no_loc)
                std::printf("mean error: auf %.3f m  baseline %.3f m\n", rep.auf_eval.mean_m, rep.baseline_eval.mean_m);
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.stage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
