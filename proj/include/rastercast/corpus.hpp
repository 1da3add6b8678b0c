#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rastercast/error.hpp"
#include "rastercast/geometry.hpp"
#include "rastercast/log.hpp"
#include "rastercast/time.hpp"

namespace rastercast {

inline constexpr double kDispersionFloor = 1e-3;  // degrees

struct RawMessage {
    std::string id;
    UtcTime ts;
    std::string text;
    Geography geo;
};

// A message reduced to the aggregation inputs: spatial index s, dispersion d,
// day index t, and the preprocessed phrase array.
struct GeoMessage {
    GeoPoint s;
    double d = kDispersionFloor;
    int t = 0;
    std::vector<std::string> tokens;
};

struct ParsedCorpus {
    std::vector<RawMessage> messages;
    std::size_t skipped = 0;
};

inline GeoPoint spatial_index(const Geography& g) {
    if (const auto* p = std::get_if<GeoPoint>(&g)) return *p;
    return std::get<BBox>(g).centroid();
}

// sqrt(half_width * half_height), floored at 1e-3 degrees; points have zero
// area and sit on the floor.
inline double dispersion_from_geography(const Geography& g) {
    if (std::holds_alternative<GeoPoint>(g)) return kDispersionFloor;
    const BBox& b = std::get<BBox>(g);
    double d = std::sqrt((b.width() / 2.0) * (b.height() / 2.0));
    return std::max(d, kDispersionFloor);
}

// One JSON object per line: id, created_at, text, and exactly one of
// point: [lon, lat] or bbox: [min_lon, min_lat, max_lon, max_lat].
// Malformed lines are skipped (counted), never fatal.
inline ParsedCorpus parse_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);

    ParsedCorpus out;
    std::string line;
    std::size_t line_no = 0;
    auto skip = [&](const char* why) {
        ++out.skipped;
        log::warn(path + ":" + std::to_string(line_no) + ": skipping line: " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            skip("not a JSON object");
            continue;
        }
        RawMessage msg;
        if (!j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
            !j["text"].is_string() || !j.contains("created_at") ||
            !j["created_at"].is_string()) {
            skip("missing or mistyped id/created_at/text");
            continue;
        }
        msg.id = j["id"].get<std::string>();
        msg.text = j["text"].get<std::string>();
        if (!try_parse_instant(j["created_at"].get<std::string>(), msg.ts)) {
            skip("unparseable created_at");
            continue;
        }
        bool has_point = j.contains("point");
        bool has_bbox = j.contains("bbox");
        if (has_point == has_bbox) {
            skip("need exactly one of point/bbox");
            continue;
        }
        auto num_array = [](const nlohmann::json& a, std::size_t n,
                            double* vals) -> bool {
            if (!a.is_array() || a.size() != n) return false;
            for (std::size_t i = 0; i < n; ++i) {
                if (!a[i].is_number()) return false;
                vals[i] = a[i].get<double>();
            }
            return true;
        };
        if (has_point) {
            double v[2];
            if (!num_array(j["point"], 2, v)) {
                skip("point must be [lon, lat]");
                continue;
            }
            msg.geo = GeoPoint{v[0], v[1]};
        } else {
            double v[4];
            if (!num_array(j["bbox"], 4, v)) {
                skip("bbox must be [min_lon, min_lat, max_lon, max_lat]");
                continue;
            }
            BBox b{v[0], v[1], v[2], v[3]};
            if (!b.valid()) {
                skip("bbox min exceeds max");
                continue;
            }
            msg.geo = b;
        }
        out.messages.push_back(std::move(msg));
    }
    if (out.skipped > 0)
        log::info(path + ": skipped " + std::to_string(out.skipped) +
                  " malformed line(s)");
    return out;
}

// Keep messages whose spatial index lies inside bounds (edges included) and
// whose day offset from the epoch lies in [first_day, last_day].
inline std::vector<RawMessage> filter_corpus(const std::vector<RawMessage>& msgs,
                                             const BBox& bounds,
                                             const CivilDate& epoch, int first_day,
                                             int last_day) {
    if (!bounds.valid()) throw ContractError("filter bounds bbox is invalid");
    std::vector<RawMessage> out;
    for (const RawMessage& m : msgs) {
        if (!bounds.contains(spatial_index(m.geo))) continue;
        std::int64_t day = day_offset(m.ts, epoch);
        if (day < first_day || day > last_day) continue;
        out.push_back(m);
    }
    return out;
}

inline GeoMessage make_geo_message(const RawMessage& raw, const CivilDate& epoch,
                                   std::vector<std::string> tokens) {
    GeoMessage g;
    g.s = spatial_index(raw.geo);
    g.d = dispersion_from_geography(raw.geo);
    g.t = day_index(raw.ts, epoch);
    g.tokens = std::move(tokens);
    return g;
}

}  // namespace rastercast
