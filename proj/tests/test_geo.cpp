#include <doctest.h>

#include <cmath>

#include "geoloc/geo.hpp"
#include "geoloc/rng.hpp"

using namespace geoloc;

namespace {

// Independent great-circle implementation (atan2 form) used as an oracle.
double haversine_oracle(const GeoPoint& a, const GeoPoint& b) {
    double phi1 = deg2rad(a.lat), phi2 = deg2rad(b.lat);
    double dlam = deg2rad(b.lon - a.lon);
    double y = std::sqrt(std::pow(std::cos(phi2) * std::sin(dlam), 2) +
                         std::pow(std::cos(phi1) * std::sin(phi2) -
                                      std::sin(phi1) * std::cos(phi2) * std::cos(dlam),
                                  2));
    double x = std::sin(phi1) * std::sin(phi2) +
               std::cos(phi1) * std::cos(phi2) * std::cos(dlam);
    return kEarthRadiusKm * std::atan2(y, x);
}

}  // namespace

TEST_CASE("haversine basics") {
    GeoPoint p{-34.6037, -58.3816};
    CHECK(haversine_km(p, p) == 0.0);

    // antipodal points: half the circumference
    GeoPoint n{0.0, 0.0}, s{0.0, 180.0};
    CHECK(haversine_km(n, s) == doctest::Approx(M_PI * kEarthRadiusKm).epsilon(1e-9));
}

TEST_CASE("haversine matches an independent oracle on city pairs") {
    GeoPoint ba{-34.6037, -58.3816}, cba{-31.4201, -64.1888};
    double d = haversine_km(ba, cba);
    CHECK(std::abs(d - haversine_oracle(ba, cba)) / d < 1e-3);

    Rng rng(42);
    for (int i = 0; i < 20; ++i) {
        GeoPoint a{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        GeoPoint b{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        double got = haversine_km(a, b);
        double want = haversine_oracle(a, b);
        CHECK(std::abs(got - want) <= 1e-3 * std::max(1.0, want));
    }
}

TEST_CASE("point validation") {
    CHECK(valid_point(GeoPoint{0, 0}));
    CHECK(valid_point(GeoPoint{-90, 180}));
    CHECK_FALSE(valid_point(GeoPoint{91, 0}));
    CHECK_FALSE(valid_point(GeoPoint{0, -181}));
    CHECK_FALSE(valid_point(GeoPoint{std::nan(""), 0}));
}
