#include <gtest/gtest.h>

#include <fstream>

#include "auf/pipeline.hpp"
#include "test_support.hpp"

#ifndef AUF_CONFIG_DIR
#define AUF_CONFIG_DIR "config"
#endif

using namespace auf;
namespace fs = std::filesystem;

namespace {

PipelineConfig room_config() {
    PipelineConfig c;
    c.fixture = "room";
    c.n_aps = 4;
    c.eval.n_points = 30;
    return c;
}

const PipelineResult& room_run() {
    static const PipelineResult r = run_pipeline(room_config());
    return r;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

}  // namespace

// ---------------------------------------------------------------------------
// Formats
// ---------------------------------------------------------------------------

TEST(DbCsv, RoundTripIsExact) {
    const auto& db = room_run().final_db;
    const auto text = io::db_to_csv(db);
    const auto back = io::db_from_csv(text);
    ASSERT_EQ(back.samples.size(), db.samples.size());
    ASSERT_EQ(back.locations.size(), db.locations.size());
    for (std::size_t i = 0; i < db.samples.size(); ++i) {
        const auto& a = db.samples[i];
        const auto& b = back.samples[i];
        EXPECT_EQ(a.ap_id, b.ap_id);
        EXPECT_EQ(a.band, b.band);
        EXPECT_EQ(a.rssi, b.rssi);
        EXPECT_EQ(a.flag, b.flag);
        EXPECT_EQ(db.location_of(a).pos.x, back.location_of(b).pos.x);
        EXPECT_EQ(db.location_of(a).t, back.location_of(b).t);
    }
    EXPECT_EQ(io::db_to_csv(back), text);
}

TEST(DbCsv, RejectsBadHeaderAndFields) {
    EXPECT_THROW(io::db_from_csv("a,b,c\n"), ParseError);
    const std::string hdr = std::string(io::kDbHeader) + "\n";
    EXPECT_THROW(io::db_from_csv(hdr + "0,0,1.0,2.0,3,2.4,-50,Bogus,0\n"), ParseError);
    EXPECT_THROW(io::db_from_csv(hdr + "0,0,1.0,2.0,3,7,-50,Measured,0\n"), ParseError);
    EXPECT_THROW(io::db_from_csv(hdr + "0,0,x,2.0,3,2.4,-50,Measured,0\n"), ParseError);
}

TEST(MapCsv, RoundTripIsExact) {
    const auto& m = room_run().map;
    const auto text = io::map_to_csv(m);
    const auto back = io::map_from_csv(text);
    EXPECT_EQ(back.aps, m.aps);
    ASSERT_EQ(back.n_points(), m.n_points());
    EXPECT_EQ(back.mean, m.mean);
    EXPECT_EQ(back.var, m.var);
    EXPECT_EQ(io::map_to_csv(back), text);
}

TEST(PlanJsonl, RoundTrip) {
    const auto& plan = room_run().floor.plan;
    const auto text = io::plan_to_jsonl(plan);
    const auto back = io::plan_from_jsonl(text);
    const auto a = plan.flatten();
    const auto b = back.flatten();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].region_id, b[i].region_id);
        EXPECT_EQ(a[i].pos.x, b[i].pos.x);
        EXPECT_EQ(a[i].pos.y, b[i].pos.y);
        EXPECT_EQ(a[i].heading, b[i].heading);
    }
    EXPECT_EQ(io::plan_to_jsonl(back), text);
    EXPECT_THROW(io::plan_from_jsonl(""), EmptyPlan);
    EXPECT_THROW(io::plan_from_jsonl("{\"seq\":1,\"region_id\":0,\"x_m\":0,\"y_m\":0,\"heading_rad\":0}\n"), ParseError);
}

TEST(DetectionJson, OutliersAndHypersRoundTrip) {
    const auto& r = room_run();
    const auto j = io::detection_json(r.recovered, r.jobs);
    EXPECT_EQ(io::outliers_from_detection(j), r.outliers);
    const auto h = io::hypers_from_detection(j);
    const auto expect = hypers_from(r.jobs);
    ASSERT_EQ(h.size(), expect.size());
    for (const auto& [k, v] : expect) {
        ASSERT_TRUE(h.count(k));
        EXPECT_EQ(h.at(k).sigma_f, v.sigma_f);
        EXPECT_EQ(h.at(k).length_scale, v.length_scale);
        EXPECT_EQ(h.at(k).sigma_n, v.sigma_n);
    }
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Fixtures, ShippedFilesMatchGenerators) {
    for (auto name : fixtures::kNames) {
        const auto path = test_support::fixture(std::string(name));
        ASSERT_TRUE(fs::exists(path)) << path;
        const auto loaded = load_grid(path);
        const auto made = fixtures::by_name(name);
        EXPECT_EQ(loaded.cells, made.cells) << name;
        EXPECT_EQ(loaded.geom.width, made.geom.width);
        EXPECT_DOUBLE_EQ(loaded.geom.resolution, made.geom.resolution);
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TEST(Config, CommittedDefaultMatchesBuiltIn) {
    const auto text = slurp(fs::path(AUF_CONFIG_DIR) / "default.json");
    EXPECT_EQ(nlohmann::json::parse(text), config_to_json(PipelineConfig{}));
    const auto c = load_config(fs::path(AUF_CONFIG_DIR) / "default.json");
    EXPECT_EQ(config_to_json(c), config_to_json(PipelineConfig{}));
}

TEST(Config, RoundTripOfModifiedConfig) {
    PipelineConfig c;
    c.fixture = "plus";
    c.seed = 42;
    c.lnr.t = 2.5;
    c.lnr.scale = ResidualScale::Predictive;
    c.map.fixed_hyper = GpHyper{5.0, 2.0, 1.0};
    c.eval.method = "pf-knn";
    c.rf.loss.p_floor = 0.01;
    c.mode = "sojourn";
    const auto j = config_to_json(c);
    const auto back = config_from_json(j);
    EXPECT_EQ(config_to_json(back), j);
    EXPECT_EQ(back.seed, 42u);
    ASSERT_TRUE(back.map.fixed_hyper.has_value());
    EXPECT_EQ(back.map.fixed_hyper->length_scale, 2.0);
}

TEST(Config, PartialOverridesKeepDefaults) {
    const auto c = config_from_json(nlohmann::json::parse(R"({"seed": 7, "world": {"n_aps": 3}})"));
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.n_aps, 3);
    EXPECT_EQ(c.lnr.t, 1.96);
    EXPECT_EQ(c.fixture, "floor3-like");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    using nlohmann::json;
    EXPECT_THROW(config_from_json(json::parse(R"({"sed": 7})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"world": {"nap": 3}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"world": {"n_aps": 2.5}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"seed": "one"})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"survey": {"mode": "hover"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"eval": {"method": "magic"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"detection": {"residual_scale": "raw"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"world": {"loss": {"p_floor": 1.0}}})")), ConfigError);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

TEST(Pipeline, ConstructionRoutesEveryOutlierToResurvey) {
    const auto& r = room_run();
    ASSERT_FALSE(r.outliers.empty());
    EXPECT_EQ(r.shifted, 0u);
    const auto rep = report_json(r);
    EXPECT_EQ(rep["counts"]["resurveyed_samples"].get<std::size_t>(), r.outliers.size());
    std::set<int> locs;
    for (std::size_t i : r.outliers) locs.insert(r.recovered.samples[i].loc);
    EXPECT_EQ(std::set<int>(r.resurvey_locations.begin(), r.resurvey_locations.end()), locs);
    for (std::size_t i : r.outliers) {
        const auto f = r.final_db.samples[i].flag;
        EXPECT_TRUE(f == SampleFlag::Resurveyed || f == SampleFlag::Lost);
    }
    EXPECT_GT(r.resurvey_report.duration_s, 0.0);
    EXPECT_GE(r.resurvey_report.idle_s, static_cast<double>(locs.size()) * r.config.sojourn.dwell_s);
}

TEST(Pipeline, MaintenanceEpochNeedsNoResurvey) {
    const auto& first = room_run();
    auto c = room_config();
    c.epoch = 1;
    const auto second = run_pipeline(c, &first.final_db);
    ASSERT_FALSE(second.outliers.empty());
    // Shifts are estimable for every group here, so every outlier whose
    // previous value is usable is shift-repaired.
    std::size_t prev_unusable = 0;
    const auto prev_loc = detail::location_lookup(first.final_db);
    const auto prev_idx = first.final_db.key_index();
    for (std::size_t i : second.outliers) {
        const auto& s = second.recovered.samples[i];
        const auto& pos = second.recovered.location_of(s).pos;
        const auto lit = prev_loc.find({pos.x, pos.y});
        ASSERT_NE(lit, prev_loc.end());
        const auto it = prev_idx.find({lit->second, s.ap_id, s.band});
        if (it == prev_idx.end() || !usable(first.final_db.samples[it->second].flag)) ++prev_unusable;
    }
    EXPECT_EQ(second.shifted + prev_unusable, second.outliers.size());
    EXPECT_LE(prev_unusable, second.outliers.size() / 20);
    EXPECT_EQ(second.resurvey_locations.empty(), prev_unusable == 0);
    for (const auto& sh : second.shifts) EXPECT_GE(sh.pairs, c.shift_min_pairs);
}

TEST(Pipeline, ArtifactsAreDeterministic) {
    const auto c = room_config();
    const auto a = test_support::scratch_dir("det_a");
    const auto b = test_support::scratch_dir("det_b");
    run_pipeline(c, nullptr, &a);
    run_pipeline(c, nullptr, &b);
    for (const char* f : {"db.csv", "db_surveyed.csv", "map.csv", "report.json", "detect.json", "plan.jsonl",
                          "segmentation.json", "cdf.csv", "config.json"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
    EXPECT_EQ(ma["artifacts"], mb["artifacts"]);
    EXPECT_EQ(ma["artifacts"]["map.csv"], sha256_hex(slurp(a / "map.csv")));
    EXPECT_EQ(ma["config_sha256"], sha256_hex(slurp(a / "config.json")));
}

TEST(Pipeline, SeedChangesArtifacts) {
    auto c = room_config();
    c.seed = 2;
    c.detect = false;
    const auto r = run_pipeline(c);
    EXPECT_NE(io::db_to_csv(r.surveyed), io::db_to_csv(room_run().surveyed));
}

TEST(Pipeline, StagesReplayFromArtifacts) {
    // Running the stages one at a time through their on-disk formats gives
    // the same map as the in-memory run.
    const auto& r = room_run();
    const auto& c = r.config;
    const auto floor = prepare_floor(c);
    const auto world = pipeline_world(c, floor.inflated);
    const auto surveyed = io::db_from_csv(io::db_to_csv(survey_stage(c, world, floor.plan).db));
    const auto recovered = io::db_from_csv(io::db_to_csv(recover_lost(surveyed, fit_recovery(surveyed, c.svr))));
    const auto det = nlohmann::json::parse(io::detection_json(recovered, detect_abnormal(recovered, c.lnr)).dump());
    const auto rep = repair_stage(c, world, floor.plan, recovered, io::outliers_from_detection(det), nullptr,
                                  r.survey_report.duration_s);
    const auto hypers = io::hypers_from_detection(det);
    const auto m = build_map(io::db_from_csv(io::db_to_csv(rep.db)), floor.refs, c.map, &hypers);
    EXPECT_EQ(io::map_to_csv(m), io::map_to_csv(r.map));
}

TEST(Pipeline, FailureWritesPartialManifest) {
    auto c = room_config();
    c.map_path = "/nonexistent/floor.pgm";
    const auto dir = test_support::scratch_dir("fail");
    fs::remove(dir / "manifest.json");
    try {
        run_pipeline(c, nullptr, &dir);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage, Stage::Map);
        EXPECT_EQ(exit_code(e.stage), 3);
    }
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["error"]["stage"], "map");
    EXPECT_TRUE(m["stages"].empty());
}

TEST(Pipeline, InvalidConfigFailsInConfigStage) {
    auto c = room_config();
    c.mode = "hover";
    try {
        run_pipeline(c);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage, Stage::Config);
        EXPECT_EQ(exit_code(e.stage), 2);
    }
}

TEST(Inject, FractionsAndSingleBandOnly) {
    auto db = room_run().surveyed;  // no injection in the default config
    std::size_t both = 0;
    const auto idx = db.key_index();
    for (const auto& [k, i] : idx) {
        const auto& [loc, ap, band] = k;
        if (band != Band::B24) continue;
        const auto j = idx.find({loc, ap, Band::B5});
        if (j != idx.end() && db.samples[i].flag == SampleFlag::Measured &&
            db.samples[j->second].flag == SampleFlag::Measured)
            ++both;
    }
    Rng rng = Rng::stream(9, "t");
    const auto log = inject_faults(db, {0.2, 0.0, 15.0}, rng);
    EXPECT_NEAR(static_cast<double>(log.single_band_lost) / static_cast<double>(both), 0.2, 0.05);
    const auto after = db.key_index();
    for (const auto& [k, i] : after) {
        const auto& [loc, ap, band] = k;
        if (band != Band::B24) continue;
        const auto j = after.find({loc, ap, Band::B5});
        if (j == after.end()) continue;
        // never both bands knocked out by injection
        if (db.samples[i].flag == SampleFlag::Lost && db.samples[j->second].flag == SampleFlag::Lost) {
            const auto& orig = room_run().surveyed;
            EXPECT_TRUE(orig.samples[i].flag == SampleFlag::Lost || orig.samples[j->second].flag == SampleFlag::Lost);
        }
    }
}

TEST(Compare, SurveyRatiosOnRoom) {
    auto c = room_config();
    const auto rep = compare_modes(c, false);
    EXPECT_GT(rep.baseline.duration_s, rep.auf.duration_s);
    EXPECT_EQ(rep.auf_resurvey.duration_s, 0.0);
    EXPECT_NEAR(rep.duration_ratio(), rep.auf.duration_s / rep.baseline.duration_s, 1e-12);
    const auto j = comparison_json(rep, false);
    EXPECT_FALSE(j.contains("duration_ratio_with_resurvey"));
}
