#pragma once

// Fingerprint database: location-stamped RSSI samples per AP and band.

#include <algorithm>
#include <map>
#include <string_view>
#include <tuple>
#include <vector>

#include "auf/core.hpp"

namespace auf {

enum class SampleFlag : std::uint8_t { Measured, Lost, RecoveredDual, RecoveredShift, Resurveyed, Abnormal };

inline std::string_view flag_name(SampleFlag f) {
    switch (f) {
        case SampleFlag::Measured: return "Measured";
        case SampleFlag::Lost: return "Lost";
        case SampleFlag::RecoveredDual: return "RecoveredDual";
        case SampleFlag::RecoveredShift: return "RecoveredShift";
        case SampleFlag::Resurveyed: return "Resurveyed";
        case SampleFlag::Abnormal: return "Abnormal";
    }
    return "?";
}

inline SampleFlag parse_flag(std::string_view s) {
    for (auto f : {SampleFlag::Measured, SampleFlag::Lost, SampleFlag::RecoveredDual, SampleFlag::RecoveredShift,
                   SampleFlag::Resurveyed, SampleFlag::Abnormal})
        if (flag_name(f) == s) return f;
    throw ParseError("unknown sample flag '" + std::string(s) + "'");
}

/// A value usable as a fingerprint (not lost, not pending repair).
inline bool usable(SampleFlag f) { return f != SampleFlag::Lost && f != SampleFlag::Abnormal; }

struct FingerprintSample {
    int loc = 0;  // index into FingerprintDatabase::locations
    int ap_id = 0;
    Band band = Band::B24;
    double rssi = kRssiFloor;  // dBm; kRssiFloor when lost
    SampleFlag flag = SampleFlag::Measured;
};

/// One scan (or one averaged stop) at a point.
struct ScanLocation {
    Vec2 pos{};
    int region_id = -1;
    double t = 0.0;  // seconds since survey start
};

struct FingerprintDatabase {
    int epoch = 0;
    std::vector<ScanLocation> locations;
    std::vector<FingerprintSample> samples;
    // Per plan waypoint: the location index whose scan represents it.
    std::vector<int> waypoint_loc;

    [[nodiscard]] const ScanLocation& location_of(const FingerprintSample& s) const {
        return locations[static_cast<std::size_t>(s.loc)];
    }

    /// Sample indices keyed by (loc, ap, band).
    [[nodiscard]] std::map<std::tuple<int, int, Band>, std::size_t> key_index() const {
        std::map<std::tuple<int, int, Band>, std::size_t> idx;
        for (std::size_t i = 0; i < samples.size(); ++i)
            idx.emplace(std::tuple{samples[i].loc, samples[i].ap_id, samples[i].band}, i);
        return idx;
    }

    [[nodiscard]] std::vector<int> ap_ids() const {
        std::vector<int> ids;
        for (const auto& s : samples) ids.push_back(s.ap_id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

    [[nodiscard]] std::vector<int> region_ids() const {
        std::vector<int> ids;
        for (const auto& l : locations) ids.push_back(l.region_id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

    /// Sample indices for one (ap, band, region) job, in database order.
    [[nodiscard]] std::vector<std::size_t> select(int ap_id, Band band, int region_id) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            if (s.ap_id == ap_id && s.band == band && location_of(s).region_id == region_id) out.push_back(i);
        }
        return out;
    }

    [[nodiscard]] std::size_t count(SampleFlag f) const {
        return static_cast<std::size_t>(
            std::count_if(samples.begin(), samples.end(), [f](const auto& s) { return s.flag == f; }));
    }
};

}  // namespace auf
