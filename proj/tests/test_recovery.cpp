#include <gtest/gtest.h>

#include "auf/fixtures.hpp"
#include "auf/recovery.hpp"
#include "auf/rfsim.hpp"

using namespace auf;

namespace {

// Database with one AP over the given locations; values from callables.
template <typename F24, typename F5>
FingerprintDatabase make_db(const std::vector<Vec2>& pos, F24 f24, F5 f5, int region = 0) {
    FingerprintDatabase db;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        db.locations.push_back({pos[i], region, static_cast<double>(i)});
        db.samples.push_back({static_cast<int>(i), 0, Band::B24, f24(pos[i]), SampleFlag::Measured});
        db.samples.push_back({static_cast<int>(i), 0, Band::B5, f5(pos[i]), SampleFlag::Measured});
    }
    return db;
}

std::vector<Vec2> transect(int n, Vec2 a, Vec2 b) {
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / (n - 1)));
    return out;
}

double eps_loss(const SvrModel& m, const std::vector<Vec2>& x, const std::vector<double>& y, double eps) {
    double l = 0;
    for (std::size_t i = 0; i < x.size(); ++i) l += std::max(0.0, std::abs(y[i] - m.predict(x[i])) - eps);
    return l;
}

}  // namespace

TEST(CollectDiff, EmptyWhenNoDualMeasured) {
    auto db = make_db(transect(4, {0, 0}, {3, 0}), [](Vec2) { return -50.0; }, [](Vec2) { return -55.0; });
    for (auto& s : db.samples)
        if (s.band == Band::B5) s.flag = SampleFlag::Lost;
    EXPECT_TRUE(collect_diff_samples(db, 0).empty());
}

TEST(CollectDiff, AllDualMeasured) {
    const auto db = make_db(transect(5, {0, 0}, {4, 0}), [](Vec2 p) { return -50.0 - p.x; }, [](Vec2) { return -60.0; });
    const auto s = collect_diff_samples(db, 0);
    ASSERT_EQ(s.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(s[i].delta_db, 10.0 - static_cast<double>(i));
}

TEST(CollectDiff, MatchesRowScanOracle) {
    Rng rng(4);
    auto db = make_db(transect(200, {0, 0}, {20, 5}), [](Vec2) { return -50.0; }, [](Vec2) { return -57.0; });
    for (auto& s : db.samples) {
        const double u = rng.uniform();
        s.flag = u < 0.15 ? SampleFlag::Lost : u < 0.2 ? SampleFlag::RecoveredDual : SampleFlag::Measured;
    }
    std::size_t expected = 0;
    for (std::size_t i = 0; i + 1 < db.samples.size(); i += 2)
        if (db.samples[i].flag == SampleFlag::Measured && db.samples[i + 1].flag == SampleFlag::Measured) ++expected;
    EXPECT_EQ(collect_diff_samples(db, 0).size(), expected);
}

TEST(Svr, ConstantTargets) {
    const auto x = transect(30, {0, 0}, {10, 3});
    const auto reg = fit_diff_regressor([&] {
        std::vector<DiffSample> s;
        for (auto p : x) s.push_back({p, 4.0});
        return s;
    }(), RecoverDirection::Predict24From5);
    EXPECT_FALSE(reg.is_fallback());
    for (auto p : x) EXPECT_NEAR(reg.predict(p), 4.0, 1.0);
    EXPECT_NEAR(reg.predict({5, 1.5}), 4.0, 1.0);
}

TEST(Svr, FallbackBelowMinSamples) {
    const std::vector<DiffSample> s{{{0, 0}, 1.0}, {{1, 0}, 2.0}, {{2, 0}, 6.0}};
    const auto reg = fit_diff_regressor(s, RecoverDirection::Predict24From5);
    EXPECT_TRUE(reg.is_fallback());
    EXPECT_DOUBLE_EQ(reg.predict({10, 10}), 3.0);
    EXPECT_DOUBLE_EQ(fit_diff_regressor(s, RecoverDirection::Predict5From24).predict({0, 0}), -3.0);
}

namespace {

struct TransectFit {
    double rmse = 0, max_err = 0;
    bool converged = false;
};

// Noise-free f(d) from the dual-band log-distance model, 50 training points
// on a transect, evaluated halfway between them.
TransectFit fit_band_difference(const SvrParams& params) {
    const AccessPoint ap{0, {0, 0}, {kDefault24, kDefault5}};
    auto f = [&](Vec2 p) { return rssi_mean(ap, Band::B24, p) - rssi_mean(ap, Band::B5, p); };
    std::vector<DiffSample> train;
    for (auto p : transect(50, {1, 0.5}, {20, 4})) train.push_back({p, f(p)});
    const auto reg = fit_diff_regressor(train, RecoverDirection::Predict24From5, params);
    TransectFit out;
    out.converged = reg.svr.converged;
    double se = 0;
    for (std::size_t i = 0; i + 1 < train.size(); ++i) {
        const Vec2 p = (train[i].pos + train[i + 1].pos) * 0.5;
        const double e = reg.predict(p) - f(p);
        se += e * e;
        out.max_err = std::max(out.max_err, std::abs(e));
    }
    out.rmse = std::sqrt(se / static_cast<double>(train.size() - 1));
    return out;
}

}  // namespace

TEST(Svr, LearnsBandDifferenceFunction) {
    // The tube half-width bounds the fit error on exact data, so the
    // noise-free check runs with a 0.5 dB tube.
    SvrParams p;
    p.epsilon_db = 0.5;
    const auto fit = fit_band_difference(p);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE(fit.rmse, 0.5);
}

TEST(Svr, DefaultTubeStaysWithinEpsilon) {
    const SvrParams p;
    const auto fit = fit_band_difference(p);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE(fit.max_err, p.epsilon_db + 0.05);
}

TEST(Svr, NeverWorseThanConstantMean) {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec2> x;
        std::vector<double> y;
        for (int i = 0; i < 60; ++i) {
            x.push_back({rng.uniform(0, 10), rng.uniform(0, 6)});
            y.push_back(3.0 * std::sin(x.back().x) + rng.normal(0, 1.5));
        }
        const SvrParams p;
        const auto m = fit_svr(x, y, p);
        SvrModel mean_only;
        mean_only.bias = m.bias;
        EXPECT_LE(eps_loss(m, x, y, p.epsilon_db), eps_loss(mean_only, x, y, p.epsilon_db) + 1e-9);
    }
}

TEST(Svr, MedianHeuristic) {
    // Pairwise distances 1, 1, 2: median 1.
    EXPECT_DOUBLE_EQ(median_heuristic_gamma({{0, 0}, {1, 0}, {2, 0}}), 0.5);
    EXPECT_DOUBLE_EQ(median_heuristic_gamma({{0, 0}}), 1.0);
}

TEST(RecoverLost, NoLostIsIdentity) {
    const auto db = make_db(transect(20, {0, 0}, {5, 0}), [](Vec2) { return -50.0; }, [](Vec2) { return -55.0; });
    const auto out = recover_lost(db, fit_recovery(db));
    for (std::size_t i = 0; i < db.samples.size(); ++i) {
        EXPECT_EQ(out.samples[i].rssi, db.samples[i].rssi);
        EXPECT_EQ(out.samples[i].flag, db.samples[i].flag);
    }
}

TEST(RecoverLost, ArithmeticContract) {
    // Constant +4 dB difference: a lost 2.4 next to 5 GHz at -60 comes back at -56.
    auto db = make_db(transect(12, {0, 0}, {5, 0}), [](Vec2) { return -56.0; }, [](Vec2) { return -60.0; });
    db.samples[4].flag = SampleFlag::Lost;
    db.samples[4].rssi = kRssiFloor;
    auto model = fit_recovery(db);
    EXPECT_NEAR(model.find(0, 0, RecoverDirection::Predict24From5)->predict(db.locations[2].pos), 4.0, 1.0);
    // Pin the regressor to exactly +4 for the arithmetic check.
    for (auto& [k, regs] : model.by_region_ap) {
        regs[0].svr = SvrModel{{}, {}, 1.0, 4.0, true};
        regs[1].svr = SvrModel{{}, {}, 1.0, -4.0, true};
    }
    const auto out = recover_lost(db, model);
    EXPECT_DOUBLE_EQ(out.samples[4].rssi, -56.0);
    EXPECT_EQ(out.samples[4].flag, SampleFlag::RecoveredDual);
    db.samples[4] = {2, 0, Band::B24, -56.0, SampleFlag::Measured};
    db.samples[5].flag = SampleFlag::Lost;
    EXPECT_DOUBLE_EQ(recover_lost(db, model).samples[5].rssi, -60.0);
}

TEST(RecoverLost, DualLossStaysAtFloor) {
    auto db = make_db(transect(12, {0, 0}, {5, 0}), [](Vec2) { return -56.0; }, [](Vec2) { return -60.0; });
    db.samples[6].flag = db.samples[7].flag = SampleFlag::Lost;
    db.samples[6].rssi = -70;  // sentinel gets normalised
    RecoveryStats st;
    const auto out = recover_lost(db, fit_recovery(db), &st);
    EXPECT_EQ(out.samples[6].rssi, kRssiFloor);
    EXPECT_EQ(out.samples[7].rssi, kRssiFloor);
    EXPECT_EQ(out.samples[6].flag, SampleFlag::Lost);
    EXPECT_EQ(st.dual_lost, 1u);
    EXPECT_EQ(st.recovered, 0u);
}

TEST(RecoverLost, SimulatedWorldInvariants) {
    const auto inflated =
        inflate_obstacles(threshold_obstacles(fixtures::floor3_like(), kDefaultObstacleThreshold), 0.2);
    const auto plan = plan_survey(segment(distance_transform(inflated)), inflated);
    const auto world = make_world(inflated, 5, 31);
    Rng rng(2);
    auto db = simulate_survey(world, plan, NoSojourn{}, {}, {}, rng).db;

    // Inject 20% single-band loss on dual-measured pairs.
    Rng inj(3);
    std::vector<std::size_t> injected;
    for (std::size_t i = 0; i + 1 < db.samples.size(); i += 2) {
        auto& a = db.samples[i];
        auto& b = db.samples[i + 1];
        ASSERT_EQ(a.loc, b.loc);
        if (a.flag != SampleFlag::Measured || b.flag != SampleFlag::Measured || inj.uniform() >= 0.2) continue;
        auto& victim = inj.uniform() < 0.5 ? a : b;
        victim.flag = SampleFlag::Lost;
        victim.rssi = kRssiFloor;
        injected.push_back(static_cast<std::size_t>(&victim - db.samples.data()));
    }
    const auto model = fit_recovery(db);
    const auto out = recover_lost(db, model);

    double err = 0;
    for (std::size_t i : injected) {
        const auto& s = out.samples[i];
        ASSERT_EQ(s.flag, SampleFlag::RecoveredDual);
        err += std::abs(s.rssi - rssi_mean(world.ap(s.ap_id), s.band, out.location_of(s).pos));
    }
    EXPECT_LE(err / static_cast<double>(injected.size()), 2.0 * kDefault24.shadow_sigma);

    for (std::size_t i = 0; i < db.samples.size(); ++i) {
        if (db.samples[i].flag == SampleFlag::Measured) {
            EXPECT_EQ(out.samples[i].rssi, db.samples[i].rssi);
            EXPECT_EQ(out.samples[i].flag, SampleFlag::Measured);
        }
        EXPECT_GE(out.samples[i].rssi, kRssiFloor);
        EXPECT_LE(out.samples[i].rssi, kRssiCeil);
    }
    // No single-band loss left behind.
    for (std::size_t i = 0; i + 1 < out.samples.size(); i += 2)
        EXPECT_FALSE((out.samples[i].flag == SampleFlag::Lost) != (out.samples[i + 1].flag == SampleFlag::Lost));

    // Idempotent, and refitting on the output gives the same regressors.
    const auto again = recover_lost(out, fit_recovery(out));
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        EXPECT_EQ(again.samples[i].rssi, out.samples[i].rssi);
        EXPECT_EQ(again.samples[i].flag, out.samples[i].flag);
    }

    // Directional consistency where no clamping happened.
    for (std::size_t i : injected) {
        const auto& s = out.samples[i];
        const auto& other = out.samples[s.band == Band::B24 ? i + 1 : i - 1];
        if (s.rssi <= kRssiFloor || s.rssi >= kRssiCeil) continue;
        const auto dir = s.band == Band::B24 ? RecoverDirection::Predict24From5 : RecoverDirection::Predict5From24;
        const auto& loc = out.location_of(s);
        EXPECT_NEAR(s.rssi - other.rssi, model.find(loc.region_id, s.ap_id, dir)->predict(loc.pos), 1e-9);
    }
}

TEST(RecoverLost, NoiseFreeDenseTransect) {
    const AccessPoint ap{0, {0, 0}, {kDefault24, kDefault5}};
    const auto pts = transect(80, {1, 1}, {25, 6});
    auto db = make_db(
        pts, [&](Vec2 p) { return rssi_mean(ap, Band::B24, p); }, [&](Vec2 p) { return rssi_mean(ap, Band::B5, p); });
    std::vector<std::size_t> lost;
    for (std::size_t i = 3; i < pts.size(); i += 7) {
        const std::size_t idx = 2 * i + (i % 2);
        db.samples[idx].flag = SampleFlag::Lost;
        db.samples[idx].rssi = kRssiFloor;
        lost.push_back(idx);
    }
    const auto out = recover_lost(db, fit_recovery(db));
    for (std::size_t idx : lost) {
        const auto& s = out.samples[idx];
        EXPECT_NEAR(s.rssi, rssi_mean(ap, s.band, out.location_of(s).pos), 1.0);
    }
}
