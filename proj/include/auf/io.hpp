#pragma once

// Artifact formats: database and map CSV, plan JSON lines, segmentation,
// detection and time/energy reports as JSON. Numbers are written in their
// shortest round-trip form so reloading reproduces the values exactly.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auf/anomaly.hpp"
#include "auf/fingerprint.hpp"
#include "auf/fpmap.hpp"
#include "auf/localize.hpp"
#include "auf/pathplan.hpp"
#include "auf/rfsim.hpp"
#include "auf/segmentation.hpp"

namespace auf::io {

using nlohmann::json;

inline std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline double parse_double(std::string_view s, const char* what) {
    double v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError(std::string("bad number for ") + what + ": '" + std::string(s) + "'");
    return v;
}

inline int parse_int(std::string_view s, const char* what) {
    int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError(std::string("bad integer for ") + what + ": '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = line.find(sep, start);
        out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fingerprint database CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDbHeader = "epoch,region_id,x_m,y_m,ap_id,band,rssi_dbm,flag,t_s";

inline std::string db_to_csv(const FingerprintDatabase& db) {
    std::string s(kDbHeader);
    s += '\n';
    for (const auto& smp : db.samples) {
        const auto& loc = db.location_of(smp);
        s += std::to_string(db.epoch) + ',' + std::to_string(loc.region_id) + ',' + num(loc.pos.x) + ',' +
             num(loc.pos.y) + ',' + std::to_string(smp.ap_id) + ',' + std::string(band_name(smp.band)) + ',' +
             num(smp.rssi) + ',' + std::string(flag_name(smp.flag)) + ',' + num(loc.t) + '\n';
    }
    return s;
}

/// Consecutive rows with the same (region, x, y, t) share a location.
inline FingerprintDatabase db_from_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != kDbHeader) throw ParseError("database CSV: missing or wrong header");
    FingerprintDatabase db;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f.size() != 9) throw ParseError("database CSV line " + std::to_string(i + 1) + ": expected 9 fields");
        const int epoch = parse_int(f[0], "epoch");
        if (i == 1) db.epoch = epoch;
        else if (epoch != db.epoch) throw ParseError("database CSV: mixed epochs");
        const ScanLocation loc{{parse_double(f[2], "x_m"), parse_double(f[3], "y_m")}, parse_int(f[1], "region_id"),
                               parse_double(f[8], "t_s")};
        if (db.locations.empty() || !(db.locations.back().pos == loc.pos) ||
            db.locations.back().region_id != loc.region_id || db.locations.back().t != loc.t)
            db.locations.push_back(loc);
        const double rssi = parse_double(f[6], "rssi_dbm");
        if (rssi < kRssiFloor || rssi > kRssiCeil) throw ParseError("database CSV: rssi outside [-100, 0]");
        db.samples.push_back({static_cast<int>(db.locations.size()) - 1, parse_int(f[4], "ap_id"), parse_band(f[5]),
                              rssi, parse_flag(f[7])});
    }
    return db;
}

// ---------------------------------------------------------------------------
// Fingerprint map CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kMapHeader = "grid_x,grid_y,ap,band,mean_dbm,var_db2";

inline std::string map_to_csv(const FingerprintMap& m) {
    std::string s(kMapHeader);
    s += '\n';
    for (std::size_t j = 0; j < m.n_points(); ++j)
        for (std::size_t a = 0; a < m.aps.size(); ++a)
            for (Band b : kBands) {
                const auto f = m.feature(a, b);
                s += num(m.points[j].pos.x) + ',' + num(m.points[j].pos.y) + ',' + std::to_string(m.aps[a]) + ',' +
                     std::string(band_name(b)) + ',' + num(m.mean_at(j, f)) + ',' + num(m.var_at(j, f)) + '\n';
            }
    return s;
}

/// Points in order of first appearance; every point must list every (AP, band).
/// Region ids are not stored and come back as -1.
inline FingerprintMap map_from_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != kMapHeader) throw ParseError("map CSV: missing or wrong header");
    struct Row {
        Vec2 pos;
        int ap;
        Band band;
        double mean, var;
    };
    std::vector<Row> rows;
    std::vector<Vec2> points;
    std::map<std::pair<double, double>, std::size_t> point_idx;
    std::set<int> aps;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f.size() != 6) throw ParseError("map CSV line " + std::to_string(i + 1) + ": expected 6 fields");
        Row r{{parse_double(f[0], "grid_x"), parse_double(f[1], "grid_y")}, parse_int(f[2], "ap"), parse_band(f[3]),
              parse_double(f[4], "mean_dbm"), parse_double(f[5], "var_db2")};
        if (!(r.var > 0)) throw ParseError("map CSV: variance must be > 0");
        if (point_idx.emplace(std::pair{r.pos.x, r.pos.y}, points.size()).second) points.push_back(r.pos);
        aps.insert(r.ap);
        rows.push_back(r);
    }
    FingerprintMap m;
    for (const auto& p : points) m.points.push_back({p, -1});
    m.aps.assign(aps.begin(), aps.end());
    m.mean.assign(m.n_points() * m.n_features(), std::numeric_limits<double>::quiet_NaN());
    m.var.assign(m.mean.size(), 0.0);
    for (const auto& r : rows) {
        const auto k = m.at(point_idx.at({r.pos.x, r.pos.y}), m.feature(*m.ap_index(r.ap), r.band));
        m.mean[k] = r.mean;
        m.var[k] = r.var;
    }
    for (double v : m.mean)
        if (std::isnan(v)) throw ParseError("map CSV: some point lacks an (AP, band) entry");
    return m;
}

// ---------------------------------------------------------------------------
// Plan JSON lines
// ---------------------------------------------------------------------------

inline std::string plan_to_jsonl(const SurveyPlan& plan) {
    std::string s;
    int seq = 0;
    for (const auto& wp : plan.flatten()) {
        const json j{{"region_id", wp.region_id}, {"seq", seq++}, {"x_m", wp.pos.x}, {"y_m", wp.pos.y},
                     {"heading_rad", wp.heading}};
        s += j.dump() + '\n';
    }
    return s;
}

/// Consecutive waypoints of one region form a RegionPlan (axes not stored).
inline SurveyPlan plan_from_jsonl(const std::string& text, double cell_size = kDefaultCellSize) {
    SurveyPlan plan;
    plan.cell_size = cell_size;
    int expect = 0;
    for (const auto& line : lines_of(text)) {
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("plan JSON: ") + e.what());
        }
        Waypoint wp;
        try {
            if (j.at("seq").get<int>() != expect++) throw ParseError("plan JSON: seq out of order");
            wp.region_id = j.at("region_id").get<int>();
            wp.pos = {j.at("x_m").get<double>(), j.at("y_m").get<double>()};
            wp.heading = j.at("heading_rad").get<double>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("plan JSON: ") + e.what());
        }
        if (plan.regions.empty() || plan.regions.back().region_id != wp.region_id)
            plan.regions.push_back({wp.region_id, {}, {}});
        plan.regions.back().waypoints.push_back(wp);
    }
    if (plan.regions.empty()) throw EmptyPlan("plan file has no waypoints");
    return plan;
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

inline json segmentation_json(const SegmentedMap& seg) {
    json regions = json::array();
    for (const auto& r : seg.regions) {
        double cx = 0, cy = 0;
        for (const auto& p : r.pixels) {
            const Vec2 w = seg.geom.to_world(p);
            cx += w.x;
            cy += w.y;
        }
        const double n = static_cast<double>(std::max<std::size_t>(r.area_px(), 1));
        regions.push_back({{"id", r.id},
                           {"area_px", r.area_px()},
                           {"area_m2", static_cast<double>(r.area_px()) * seg.geom.resolution * seg.geom.resolution},
                           {"value_m", r.value},
                           {"centroid", {cx / n, cy / n}}});
    }
    return {{"width", seg.geom.width},       {"height", seg.geom.height},
            {"resolution", seg.geom.resolution}, {"origin", {seg.geom.origin.x, seg.geom.origin.y}},
            {"regions", regions}};
}

inline json time_energy_json(const TimeEnergyReport& r) {
    return {{"duration_s", r.duration_s},   {"travel_s", r.travel_s},         {"idle_s", r.idle_s},
            {"distance_m", r.distance_m},   {"n_decel_events", r.n_decel_events}, {"robot_wh", r.robot_wh},
            {"laser_wh", r.laser_wh},       {"laptop_wh", r.laptop_wh},       {"total_wh", r.total_wh()}};
}

inline json detection_json(const FingerprintDatabase& db, const std::vector<DetectionJob>& jobs) {
    json groups = json::array();
    std::size_t total = 0;
    for (const auto& j : jobs) {
        json g{{"ap_id", j.ap_id}, {"band", band_name(j.band)}, {"region_id", j.region_id}, {"n", j.samples.size()}};
        if (j.report) {
            const auto& r = *j.report;
            json outs = json::array();
            for (std::size_t k = 0; k < r.outliers.size(); ++k) {
                const auto& s = db.samples[j.samples[r.outliers[k]]];
                const auto& loc = db.location_of(s);
                outs.push_back({{"sample", j.samples[r.outliers[k]]},
                                {"x_m", loc.pos.x},
                                {"y_m", loc.pos.y},
                                {"rssi_dbm", s.rssi},
                                {"r", r.removed_r[k]}});
            }
            total += r.outliers.size();
            g["iterations"] = r.iterations;
            g["converged"] = r.converged;
            g["hyper"] = {{"sigma_f", r.hyper.sigma_f},
                          {"length_scale", r.hyper.length_scale},
                          {"sigma_n", r.hyper.sigma_n},
                          {"defaulted", r.hyper_defaulted}};
            g["outliers"] = outs;
        } else {
            g["skipped"] = "too few samples";
        }
        groups.push_back(g);
    }
    return {{"n_outliers", total}, {"groups", groups}};
}

/// Outlier sample indices listed in a detection report, sorted.
inline std::vector<std::size_t> outliers_from_detection(const json& j) {
    std::vector<std::size_t> out;
    for (const auto& g : j.at("groups"))
        if (g.contains("outliers"))
            for (const auto& o : g.at("outliers")) out.push_back(o.at("sample").get<std::size_t>());
    std::sort(out.begin(), out.end());
    return out;
}

/// Fitted (not defaulted) hyperparameters per group from a detection report.
inline std::map<GroupKey, GpHyper> hypers_from_detection(const json& j) {
    std::map<GroupKey, GpHyper> out;
    for (const auto& g : j.at("groups")) {
        if (!g.contains("hyper") || g["hyper"].at("defaulted").get<bool>()) continue;
        const auto& h = g["hyper"];
        out[{g.at("ap_id").get<int>(), parse_band(g.at("band").get<std::string>()), g.at("region_id").get<int>()}] =
            GpHyper{h.at("sigma_f").get<double>(), h.at("length_scale").get<double>(), h.at("sigma_n").get<double>()};
    }
    return out;
}

inline json error_stats_json(const ErrorStats& s) {
    return {{"n", s.errors.size()}, {"mean_m", s.mean_m}, {"max_m", s.max_m}};
}

inline std::string cdf_csv(const ErrorStats& s) {
    std::string out = "error_m,fraction\n";
    for (const auto& [e, f] : s.cdf) out += num(e) + ',' + num(f) + '\n';
    return out;
}

}  // namespace auf::io
