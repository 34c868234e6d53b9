#include <gtest/gtest.h>

#include <sstream>

#include "auf/gridmap.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace auf;
using oracle::brute_force_edt;

namespace {

BinaryGrid make_binary(int w, int h, double res = 1.0) {
    return BinaryGrid(GridGeometry{w, h, res, {}}, Cell::Free);
}

}  // namespace

TEST(LoadGrid, AsciiReadBack) {
    std::istringstream in("P2\n2 2\n255\n255 0\n0 255\n");
    const auto g = parse_pgm(in);
    EXPECT_EQ(g.width(), 2);
    EXPECT_EQ(g.height(), 2);
    EXPECT_EQ(g.cells, (std::vector<std::uint8_t>{255, 0, 0, 255}));
}

TEST(LoadGrid, CommentsInHeader) {
    std::istringstream in("P2\n# made by hand\n2 1\n# max\n255\n7 9\n");
    EXPECT_EQ(parse_pgm(in).cells, (std::vector<std::uint8_t>{7, 9}));
}

TEST(LoadGrid, EmptyFileIsParseError) {
    std::istringstream in("");
    EXPECT_THROW(parse_pgm(in), ParseError);
}

TEST(LoadGrid, MalformedHeader) {
    std::istringstream bad_magic("P7\n2 2\n255\n");
    EXPECT_THROW(parse_pgm(bad_magic), ParseError);
    std::istringstream bad_width("P2\nx 2\n255\n");
    EXPECT_THROW(parse_pgm(bad_width), ParseError);
    std::istringstream truncated("P5\n4 4\n255\nab");
    EXPECT_THROW(parse_pgm(truncated), ParseError);
}

TEST(LoadGrid, MaxvalMustBe255) {
    std::istringstream in("P2\n1 1\n15\n3\n");
    EXPECT_THROW(parse_pgm(in), UnsupportedFormat);
}

TEST(LoadGrid, BinaryRoundTripIsByteIdentical) {
    Rng rng(7);
    OccupancyGrid g(GridGeometry{100, 80, 0.05, {1.5, -2.0}});
    for (auto& c : g.cells) c = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
    const auto dir = test_support::scratch_dir("gridmap_roundtrip");
    const auto path = dir / "random.pgm";
    save_grid(path, g);
    save_meta(meta_path_for(path), meta_of(g.geom));
    const auto back = load_grid(path);
    EXPECT_EQ(back.geom, g.geom);
    EXPECT_EQ(back.cells, g.cells);
    // Idempotent on re-load.
    EXPECT_EQ(threshold_obstacles(load_grid(path)).cells, threshold_obstacles(back).cells);
}

TEST(Threshold, Basic) {
    OccupancyGrid g(GridGeometry{2, 1, 1.0, {}});
    g.cells = {255, 0};
    const auto b = threshold_obstacles(g, 128);
    EXPECT_EQ(b.cells, (std::vector<Cell>{Cell::Free, Cell::Obstacle}));
    EXPECT_EQ(threshold_obstacles(g, 0).count(Cell::Obstacle), 0u);
}

TEST(Threshold, ClampedAbove255CountsStrictlyBelow255) {
    Rng rng(3);
    OccupancyGrid g(GridGeometry{40, 30, 1.0, {}});
    for (auto& c : g.cells) c = static_cast<std::uint8_t>(rng.next_u64() % 256);
    const auto expected = static_cast<std::size_t>(std::count_if(g.cells.begin(), g.cells.end(), [](auto v) { return v < 255; }));
    EXPECT_EQ(threshold_obstacles(g, 256).count(Cell::Obstacle), expected);
}

TEST(DistanceTransform, Line) {
    auto g = make_binary(3, 1, 0.5);
    g.at(0, 0) = Cell::Obstacle;
    const auto d = distance_transform(g);
    EXPECT_DOUBLE_EQ(d.cells[0], 0.0);
    EXPECT_DOUBLE_EQ(d.cells[1], 0.5);
    EXPECT_DOUBLE_EQ(d.cells[2], 1.0);
}

TEST(DistanceTransform, CenterObstacleCorner) {
    auto g = make_binary(5, 5, 0.1);
    g.at(2, 2) = Cell::Obstacle;
    const auto d = distance_transform(g);
    EXPECT_NEAR(d.at(0, 0), 2.0 * std::sqrt(2.0) * 0.1, 1e-12);
    EXPECT_DOUBLE_EQ(d.at(2, 2), 0.0);
}

TEST(DistanceTransform, AllFreeThrows) {
    EXPECT_THROW(distance_transform(make_binary(4, 4)), AllFreeError);
}

TEST(DistanceTransform, MatchesBruteForceOnRandomGrids) {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 1 + static_cast<int>(rng.index(64));
        const int h = 1 + static_cast<int>(rng.index(64));
        const double density = rng.uniform(0.002, 0.3);
        auto g = make_binary(w, h, 0.05);
        for (auto& c : g.cells) c = rng.uniform() < density ? Cell::Obstacle : Cell::Free;
        g.cells[rng.index(g.cells.size())] = Cell::Obstacle;
        const auto d = distance_transform(g);
        const auto oracle = brute_force_edt(g);
        for (std::size_t i = 0; i < oracle.size(); ++i) ASSERT_NEAR(d.cells[i], oracle[i], 1e-9) << "trial " << trial;
        // Lipschitz in the pixel metric.
        for (int r = 0; r < h; ++r)
            for (int c = 0; c + 1 < w; ++c) ASSERT_LE(std::abs(d.at(c, r) - d.at(c + 1, r)), 0.05 + 1e-12);
    }
}

TEST(Inflate, ZeroRadiusIsIdentity) {
    auto g = make_binary(6, 6);
    g.at(1, 4) = Cell::Obstacle;
    EXPECT_EQ(inflate_obstacles(g, 0.0).cells, g.cells);
}

TEST(Inflate, UnitRadiusStampsPlusShape) {
    auto g = make_binary(9, 9, 0.2);
    g.at(4, 4) = Cell::Obstacle;
    const auto out = inflate_obstacles(g, 0.2);
    // Brute-force disk stamp.
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) {
            const bool in_disk = (c - 4) * (c - 4) + (r - 4) * (r - 4) <= 1;
            EXPECT_EQ(out.at(c, r) == Cell::Obstacle, in_disk) << c << "," << r;
        }
    EXPECT_EQ(out.count(Cell::Obstacle), 5u);
}

TEST(Inflate, HugeRadiusFillsGrid) {
    auto g = make_binary(7, 5);
    g.at(0, 0) = Cell::Obstacle;
    EXPECT_EQ(inflate_obstacles(g, 100.0).count(Cell::Free), 0u);
}

TEST(Inflate, MonotoneAndSuperAdditive) {
    Rng rng(5);
    auto g = make_binary(30, 30, 0.1);
    for (auto& c : g.cells) c = rng.uniform() < 0.02 ? Cell::Obstacle : Cell::Free;
    g.at(0, 0) = Cell::Obstacle;
    std::size_t prev_free = g.count(Cell::Free);
    for (double r : {0.1, 0.2, 0.35, 0.5}) {
        const auto out = inflate_obstacles(g, r);
        EXPECT_LE(out.count(Cell::Free), prev_free);
        prev_free = out.count(Cell::Free);
    }
    const auto joint = inflate_obstacles(g, 0.5);
    const auto stepped = inflate_obstacles(inflate_obstacles(g, 0.2), 0.3);
    for (std::size_t i = 0; i < joint.cells.size(); ++i)
        if (stepped.cells[i] == Cell::Obstacle) {
            EXPECT_EQ(joint.cells[i], Cell::Obstacle);
        }
}
