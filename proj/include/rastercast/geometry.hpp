#pragma once

#include <variant>

namespace rastercast {

// Longitude/latitude in degrees, treated as independent planar axes.
struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;
};

struct BBox {
    double min_lon = 0.0;
    double min_lat = 0.0;
    double max_lon = 0.0;
    double max_lat = 0.0;

    bool valid() const { return min_lon <= max_lon && min_lat <= max_lat; }
    double width() const { return max_lon - min_lon; }
    double height() const { return max_lat - min_lat; }
    GeoPoint centroid() const {
        return {(min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0};
    }
    // edges are inside
    bool contains(const GeoPoint& p) const {
        return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat &&
               p.lat <= max_lat;
    }
};

using Geography = std::variant<GeoPoint, BBox>;

}  // namespace rastercast
