#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace floodsense::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double lat = 0;
  double lon = 0;

  bool valid() const { return lat >= -90 && lat <= 90 && lon >= -180 && lon <= 180; }
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Great-circle distance in km.
inline double haversine_km(LatLon a, LatLon b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

struct BBox {
  double min_lat = 0;
  double min_lon = 0;
  double max_lat = 0;
  double max_lon = 0;

  bool valid() const { return min_lat <= max_lat && min_lon <= max_lon; }
  bool contains(LatLon p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  /// Planar area in squared degrees; only used to rank nested boxes.
  double area() const { return (max_lat - min_lat) * (max_lon - min_lon); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

using Ring = std::vector<LatLon>;

/// Even-odd rule over all rings, so holes work when listed as extra rings.
inline bool rings_contain(const std::vector<Ring>& rings, LatLon p) {
  bool inside = false;
  for (const auto& ring : rings) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const auto& a = ring[i];
      const auto& b = ring[j];
      if ((a.lat > p.lat) != (b.lat > p.lat) &&
          p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon)
        inside = !inside;
    }
  }
  return inside;
}

}  // namespace floodsense::geo
