#pragma once

#include <cmath>
#include <stdexcept>

namespace geoloc {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kAcc100ThresholdKm = 160.9344;  // 100 miles

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

inline bool valid_point(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
           p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

inline double deg2rad(double d) { return d * M_PI / 180.0; }

/// Great-circle distance in km on a sphere of radius kEarthRadiusKm.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    double phi1 = deg2rad(a.lat), phi2 = deg2rad(b.lat);
    double dphi = phi2 - phi1;
    double dlam = deg2rad(b.lon - a.lon);
    double s = std::sin(dphi / 2.0);
    double t = std::sin(dlam / 2.0);
    double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
    if (h > 1.0) h = 1.0;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

}  // namespace geoloc
