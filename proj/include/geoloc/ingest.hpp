#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "geoloc/geo.hpp"

namespace geoloc {

struct TweetRecord {
    std::string tweet_id;
    std::string user_id;
    std::string text;
    std::optional<GeoPoint> coords;
    std::optional<std::array<GeoPoint, 4>> bbox;
    std::string place_name;
    std::vector<std::string> mentions;
    int64_t timestamp = 0;
};

struct UserRecord {
    std::string user_id;
    std::vector<TweetRecord> tweets;
    std::optional<std::string> profile_location;
    std::vector<std::string> followees;
};

struct GazetteerEntry {
    int64_t geoname_id = 0;
    std::string name;
    std::vector<std::string> alt_names;
    GeoPoint point;
    std::string country_code;
    int64_t population = 0;
};

struct GroundTruth {
    std::string user_id;
    int64_t city = 0;
    GeoPoint point;
};

struct ParseStats {
    size_t lines = 0;
    size_t warnings = 0;
};

/// Gazetteer with a case-folded name index and a 1-degree spatial grid.
class Gazetteer {
public:
    void add(GazetteerEntry e);
    static Gazetteer load_tsv(const std::string& path);

    const std::vector<GazetteerEntry>& entries() const { return entries_; }
    const GazetteerEntry* by_id(int64_t geoname_id) const;

    /// All entries whose name or alt name equals `name` (case-folded).
    std::vector<const GazetteerEntry*> by_name(const std::string& name) const;

    /// Nearest entry within radius_km of p, ties broken by lowest geoname_id.
    const GazetteerEntry* nearest(const GeoPoint& p, double radius_km) const;

private:
    std::vector<GazetteerEntry> entries_;
    std::unordered_map<int64_t, size_t> by_id_;
    std::unordered_map<std::string, std::vector<size_t>> by_name_;
    std::map<std::pair<int, int>, std::vector<size_t>> grid_;
};

std::string casefold(const std::string& s);

/// Line-delimited JSON tweet records, grouped per user. Malformed lines are
/// skipped and counted.
std::vector<UserRecord> parse_records(const std::string& path, ParseStats* stats = nullptr);

/// Line-delimited JSON profile records merged into existing user records;
/// unknown user ids create text-less records.
void parse_profiles(const std::string& path, std::vector<UserRecord>& users,
                    ParseStats* stats = nullptr);

std::optional<std::pair<int64_t, GeoPoint>> resolve_geotag(const TweetRecord& t,
                                                           const Gazetteer& g,
                                                           double r_match_km = 25.0);

std::optional<GroundTruth> assign_ground_truth(const UserRecord& u, const Gazetteer& g,
                                               double r_match_km = 25.0);

std::vector<const GazetteerEntry*> match_profile_location(const std::string& profile,
                                                          const Gazetteer& g);

struct DistanceCDF {
    std::vector<double> sorted_km;           // one per eligible user
    double frac_below_10km = 0.0;
    double frac_below_161km = 0.0;
    std::vector<std::pair<double, double>> quantiles;  // (q, km)
    bool empty() const { return sorted_km.empty(); }
    std::string to_csv() const;              // distance_km,cum_fraction
};

DistanceCDF profile_distance_report(const std::vector<UserRecord>& users,
                                    const std::vector<GroundTruth>& truths,
                                    const Gazetteer& g);

}  // namespace geoloc
