#include <gtest/gtest.h>

#include "auf/fixtures.hpp"
#include "auf/pathplan.hpp"
#include "oracles.hpp"

using namespace auf;
using oracle::rotated_rect;

namespace {

std::vector<Pixel> block(int c0, int r0, int w, int h) {
    std::vector<Pixel> px;
    for (int r = r0; r < r0 + h; ++r)
        for (int c = c0; c < c0 + w; ++c) px.push_back({c, r});
    return px;
}

// Map with one region covering the given pixels.
SegmentedMap single_region_map(const std::vector<Pixel>& px, int w, int h, double res) {
    SegmentedMap seg{GridGeometry{w, h, res, {}}, {}, Raster<int>(GridGeometry{w, h, res, {}}, -1)};
    Region reg;
    reg.id = 0;
    reg.pixels = px;
    reg.value = 1.0;
    for (const auto& p : px) seg.labels.at(p) = 0;
    seg.regions.push_back(reg);
    return seg;
}

SegmentedMap segment_fixture(const OccupancyGrid& g, BinaryGrid* inflated_out = nullptr) {
    auto b = inflate_obstacles(threshold_obstacles(g), 0.2);
    auto seg = segment(distance_transform(b));
    if (inflated_out) *inflated_out = b;
    return seg;
}

}  // namespace

TEST(PrincipalAxes, AxisAlignedBlock) {
    const auto ax = principal_axes(block(0, 0, 10, 2));
    EXPECT_NEAR(ax.a1.x, 1.0, 1e-12);
    EXPECT_NEAR(ax.a1.y, 0.0, 1e-12);
    EXPECT_NEAR(ax.lambda1, 99.0 / 12.0, 1e-12);
    EXPECT_NEAR(ax.lambda2, 3.0 / 12.0, 1e-12);
    EXPECT_NEAR(ax.lambda1 / ax.lambda2, 33.0, 1e-9);
}

TEST(PrincipalAxes, SquareTieBreak) {
    const auto ax = principal_axes(block(5, 5, 7, 7));
    EXPECT_NEAR(ax.lambda1, ax.lambda2, 1e-12);
    EXPECT_EQ(ax.a1, (Vec2{1.0, 0.0}));
}

TEST(PrincipalAxes, OrthonormalAndSigned) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const auto px = rotated_rect(rng.uniform(10, 80), rng.uniform(3, 20), rng.uniform(-3.2, 3.2));
        const auto ax = principal_axes(px);
        EXPECT_LT(std::abs(ax.a1.dot(ax.a2)), 1e-9);
        EXPECT_NEAR(ax.a1.norm(), 1.0, 1e-9);
        EXPECT_NEAR(ax.a2.norm(), 1.0, 1e-9);
        EXPECT_GE(ax.lambda1, ax.lambda2);
        EXPECT_TRUE(ax.a1.x > 0 || (ax.a1.x == 0 && ax.a1.y > 0));
    }
}

TEST(PrincipalAxes, Diagonal45) {
    const auto ax = principal_axes(rotated_rect(80, 10, std::numbers::pi / 4));
    EXPECT_NEAR(ax.a1.x, std::sqrt(0.5), 1e-2);
    EXPECT_NEAR(ax.a1.y, std::sqrt(0.5), 1e-2);
}

TEST(PrincipalAxes, RotationEquivariance) {
    for (double deg : {0.0, 30.0, 45.0, 90.0}) {
        const double th = deg * std::numbers::pi / 180.0;
        const auto ax = principal_axes(rotated_rect(90, 14, th));
        const Vec2 expect{std::cos(th), std::sin(th)};
        EXPECT_GT(std::abs(ax.a1.dot(expect)), 1.0 - 1e-3) << deg;
    }
}

TEST(PrincipalAxes, SinglePixelIsDegenerate) {
    EXPECT_THROW(principal_axes(block(0, 0, 1, 1)), DegenerateRegion);
}

TEST(BoundingRectangle, AxisAligned) {
    const auto px = block(3, 4, 10, 2);
    const auto rect = bounding_rectangle(px, principal_axes(px));
    EXPECT_NEAR(rect.length_u(), 10.0, 1.0);
    EXPECT_NEAR(rect.length_v(), 2.0, 1.0);
}

TEST(BoundingRectangle, RecoversRotatedExtents) {
    for (double deg : {15.0, 30.0, 60.0}) {
        const auto px = rotated_rect(70, 20, deg * std::numbers::pi / 180.0);
        const auto rect = bounding_rectangle(px, principal_axes(px));
        EXPECT_NEAR(rect.length_u(), 70.0, 1.5) << deg;
        EXPECT_NEAR(rect.length_v(), 20.0, 1.5) << deg;
        EXPECT_GE(rect.length_u() * rect.length_v(), static_cast<double>(px.size()));
    }
}

TEST(BoundingRectangle, SingleRowHasUnitHeight) {
    const auto px = block(0, 0, 12, 1);
    const auto rect = bounding_rectangle(px, principal_axes(px));
    EXPECT_DOUBLE_EQ(rect.length_v(), 1.0);
}

TEST(GridWaypoints, FullRectangleSerpentine) {
    // 4.0 m x 2.4 m at 0.05 m/px
    const auto px = block(10, 10, 80, 48);
    const auto seg = single_region_map(px, 100, 70, 0.05);
    const auto& reg = seg.regions[0];
    const auto wps = grid_waypoints(bounding_rectangle(reg, principal_axes(reg)), reg, seg, 0.8);
    ASSERT_EQ(wps.size(), 15u);
    for (std::size_t k = 0; k < wps.size(); ++k) {
        EXPECT_EQ(wps[k].row, static_cast<int>(k / 5));
        if (k % 5 != 0) {
            const Vec2 d = wps[k].pos - wps[k - 1].pos;
            EXPECT_NEAR(std::abs(d.x), 0.8, 1e-6);  // one cell along a1
            EXPECT_NEAR(d.y, 0.0, 1e-9);
            EXPECT_GT(d.x * (wps[k].row % 2 == 0 ? 1 : -1), 0.0);  // alternating direction
        }
    }
    EXPECT_EQ(count_turns(wps), 4);
}

TEST(GridWaypoints, SmallerThanOneCell) {
    const auto px = block(20, 20, 10, 6);
    const auto seg = single_region_map(px, 50, 50, 0.05);
    const auto& reg = seg.regions[0];
    const auto wps = grid_waypoints(bounding_rectangle(reg, principal_axes(reg)), reg, seg, 0.8);
    ASSERT_EQ(wps.size(), 1u);
    EXPECT_NEAR(wps[0].pos.x, 24.5 * 0.05, 1e-9);
    EXPECT_NEAR(wps[0].pos.y, 22.5 * 0.05, 1e-9);
}

TEST(GridWaypoints, LShapeMatchesMembershipOracle) {
    auto px = block(0, 0, 120, 30);
    for (const auto& p : block(0, 30, 30, 90)) px.push_back(p);
    const auto seg = single_region_map(px, 130, 130, 0.05);
    const auto& reg = seg.regions[0];
    const auto wps = grid_waypoints(bounding_rectangle(reg, principal_axes(reg)), reg, seg, 0.8);
    EXPECT_EQ(wps.size(), oracle::cell_count(reg, seg, 0.8));
    for (const auto& w : wps) EXPECT_EQ(seg.label_at(w.pos), 0);
}

TEST(GridWaypoints, PrincipalSweepMinimisesTurns) {
    for (auto [w, h] : {std::pair{160, 40}, std::pair{100, 64}, std::pair{64, 64}}) {
        const auto seg = single_region_map(block(0, 0, w, h), w, h, 0.05);
        const auto& reg = seg.regions[0];
        const auto rect = bounding_rectangle(reg, principal_axes(reg));
        const int along = count_turns(grid_waypoints(rect, reg, seg, 0.8, SweepAxis::Principal));
        const int across = count_turns(grid_waypoints(rect, reg, seg, 0.8, SweepAxis::Secondary));
        if (w == h)
            EXPECT_EQ(along, across);
        else
            EXPECT_LT(along, across);
    }
}

TEST(PlanSurvey, EightMetreRoom) {
    BinaryGrid inflated;
    const auto seg = segment_fixture(fixtures::room(), &inflated);
    const auto plan = plan_survey(seg, inflated, 0.8);
    ASSERT_EQ(plan.regions.size(), 1u);
    EXPECT_EQ(plan.size(), 100u);
}

TEST(PlanSurvey, TwoRoomsTwoSerpentineSubplans) {
    fixtures::FloorSketch s(18.0, 8.8);
    s.border(0.2).wall(8.8, 0, 9.2, 8.8);
    BinaryGrid inflated;
    const auto seg = segment_fixture(s.grid(), &inflated);
    const auto plan = plan_survey(seg, inflated, 0.8);
    ASSERT_EQ(plan.regions.size(), 2u);
    for (const auto& rp : plan.regions) {
        const int rows = rp.waypoints.back().row + 1;
        EXPECT_EQ(count_turns(rp.waypoints), 2 * (rows - 1));
    }
    EXPECT_EQ(plan.flatten().size(), plan.size());
}

TEST(PlanSurvey, FixtureCountsMatchOracleAndStayFree) {
    for (auto name : fixtures::kNames) {
        BinaryGrid inflated;
        const auto seg = segment_fixture(fixtures::by_name(name), &inflated);
        const auto plan = plan_survey(seg, inflated, 0.8);
        std::size_t oracle = 0;
        for (const auto& reg : seg.regions)
            if (reg.area_px() >= 2) oracle += oracle::cell_count(reg, seg, 0.8);
        EXPECT_EQ(plan.size(), oracle) << name;
        for (const auto& w : plan.flatten()) {
            EXPECT_TRUE(inflated.is_free(w.pos)) << name;
            EXPECT_EQ(seg.label_at(w.pos), w.region_id);
        }
        // deterministic
        const auto again = plan_survey(seg, inflated, 0.8).flatten();
        const auto first = plan.flatten();
        ASSERT_EQ(again.size(), first.size());
        for (std::size_t k = 0; k < first.size(); ++k) EXPECT_EQ(again[k].pos, first[k].pos);
    }
}

TEST(PlanSurvey, GreedyOrderFromOrigin) {
    BinaryGrid inflated;
    const auto seg = segment_fixture(fixtures::floor3_like(), &inflated);
    const auto plan = plan_survey(seg, inflated, 0.8);
    // The first visited region has the entry nearest to the origin.
    double best = 1e300;
    for (const auto& rp : plan.regions) best = std::min(best, distance(plan.start, rp.waypoints.front().pos));
    EXPECT_DOUBLE_EQ(distance(plan.start, plan.regions.front().waypoints.front().pos), best);
}

TEST(PlanSurvey, EmptySegmentationThrows) {
    SegmentedMap seg{GridGeometry{4, 4, 0.1, {}}, {}, Raster<int>(GridGeometry{4, 4, 0.1, {}}, -1)};
    EXPECT_THROW(plan_survey(seg, BinaryGrid(seg.geom)), EmptyPlan);
}
