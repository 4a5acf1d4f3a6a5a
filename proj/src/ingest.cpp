#include "geoloc/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace geoloc {

using nlohmann::json;

std::string casefold(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void Gazetteer::add(GazetteerEntry e) {
    size_t idx = entries_.size();
    by_id_[e.geoname_id] = idx;
    by_name_[casefold(e.name)].push_back(idx);
    for (const auto& a : e.alt_names) by_name_[casefold(a)].push_back(idx);
    int glat = static_cast<int>(std::floor(e.point.lat));
    int glon = static_cast<int>(std::floor(e.point.lon));
    grid_[{glat, glon}].push_back(idx);
    entries_.push_back(std::move(e));
}

Gazetteer Gazetteer::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gazetteer: " + path);
    Gazetteer g;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() < 15) continue;
        GazetteerEntry e;
        e.geoname_id = std::stoll(cols[0]);
        e.name = cols[1];
        if (!cols[2].empty() && cols[2] != cols[1]) e.alt_names.push_back(cols[2]);
        std::stringstream as(cols[3]);
        std::string alt;
        while (std::getline(as, alt, ',')) {
            if (!alt.empty()) e.alt_names.push_back(alt);
        }
        e.point.lat = std::stod(cols[4]);
        e.point.lon = std::stod(cols[5]);
        e.country_code = cols[8];
        if (!cols[14].empty()) e.population = std::stoll(cols[14]);
        g.add(std::move(e));
    }
    return g;
}

const GazetteerEntry* Gazetteer::by_id(int64_t geoname_id) const {
    auto it = by_id_.find(geoname_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::vector<const GazetteerEntry*> Gazetteer::by_name(const std::string& name) const {
    std::vector<const GazetteerEntry*> out;
    auto it = by_name_.find(casefold(name));
    if (it == by_name_.end()) return out;
    std::set<int64_t> seen;
    for (size_t idx : it->second) {
        const auto& e = entries_[idx];
        if (seen.insert(e.geoname_id).second) out.push_back(&e);
    }
    std::sort(out.begin(), out.end(),
              [](auto* a, auto* b) { return a->geoname_id < b->geoname_id; });
    return out;
}

const GazetteerEntry* Gazetteer::nearest(const GeoPoint& p, double radius_km) const {
    // grid cells are 1 degree; scan enough rings to cover radius_km
    double coslat = std::max(0.05, std::cos(deg2rad(p.lat)));
    int ring_lat = static_cast<int>(radius_km / 111.0) + 1;
    int ring_lon = static_cast<int>(radius_km / (111.0 * coslat)) + 1;
    int clat = static_cast<int>(std::floor(p.lat));
    int clon = static_cast<int>(std::floor(p.lon));
    const GazetteerEntry* best = nullptr;
    double best_d = radius_km;
    for (int dlat = -ring_lat; dlat <= ring_lat; ++dlat) {
        for (int dlon = -ring_lon; dlon <= ring_lon; ++dlon) {
            int glon = clon + dlon;
            while (glon < -180) glon += 360;
            while (glon >= 180) glon -= 360;
            auto it = grid_.find({clat + dlat, glon});
            if (it == grid_.end()) continue;
            for (size_t idx : it->second) {
                const auto& e = entries_[idx];
                double d = haversine_km(p, e.point);
                if (d > radius_km) continue;
                bool better = !best || d < best_d ||
                              (d == best_d && e.geoname_id < best->geoname_id);
                if (better) {
                    best = &e;
                    best_d = d;
                }
            }
        }
    }
    return best;
}

namespace {

std::optional<TweetRecord> parse_tweet_line(const json& j) {
    TweetRecord t;
    t.tweet_id = j.at("tweet_id").get<std::string>();
    t.user_id = j.at("user_id").get<std::string>();
    t.text = j.value("text", std::string());
    if (j.contains("lat") && j.contains("lon")) {
        GeoPoint p{j.at("lat").get<double>(), j.at("lon").get<double>()};
        if (!valid_point(p)) return std::nullopt;
        t.coords = p;
    }
    if (j.contains("bbox")) {
        const auto& bb = j.at("bbox");
        if (!bb.is_array() || bb.size() != 4) return std::nullopt;
        std::array<GeoPoint, 4> corners;
        for (size_t k = 0; k < 4; ++k) {
            corners[k] = GeoPoint{bb[k].at(0).get<double>(), bb[k].at(1).get<double>()};
            if (!valid_point(corners[k])) return std::nullopt;
        }
        t.bbox = corners;
        t.place_name = j.value("place_name", std::string());
    }
    if (j.contains("mentions"))
        t.mentions = j.at("mentions").get<std::vector<std::string>>();
    t.timestamp = j.value("ts", int64_t{0});
    return t;
}

}  // namespace

std::vector<UserRecord> parse_records(const std::string& path, ParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open records file: " + path);
    ParseStats local;
    std::unordered_map<std::string, size_t> by_user;
    std::vector<UserRecord> users;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++local.lines;
        std::optional<TweetRecord> t;
        try {
            t = parse_tweet_line(json::parse(line));
        } catch (const json::exception&) {
            t = std::nullopt;
        }
        if (!t) {
            ++local.warnings;
            continue;
        }
        auto [it, fresh] = by_user.try_emplace(t->user_id, users.size());
        if (fresh) users.push_back(UserRecord{t->user_id, {}, std::nullopt, {}});
        users[it->second].tweets.push_back(std::move(*t));
    }
    for (auto& u : users) {
        std::stable_sort(u.tweets.begin(), u.tweets.end(),
                         [](const TweetRecord& a, const TweetRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
    }
    if (stats) *stats = local;
    return users;
}

void parse_profiles(const std::string& path, std::vector<UserRecord>& users,
                    ParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile file: " + path);
    ParseStats local;
    std::unordered_map<std::string, size_t> by_user;
    for (size_t i = 0; i < users.size(); ++i) by_user[users[i].user_id] = i;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++local.lines;
        try {
            json j = json::parse(line);
            std::string uid = j.at("user_id").get<std::string>();
            auto [it, fresh] = by_user.try_emplace(uid, users.size());
            if (fresh) users.push_back(UserRecord{uid, {}, std::nullopt, {}});
            UserRecord& u = users[it->second];
            if (j.contains("profile_location") && !j.at("profile_location").is_null())
                u.profile_location = j.at("profile_location").get<std::string>();
            if (j.contains("followees"))
                u.followees = j.at("followees").get<std::vector<std::string>>();
        } catch (const json::exception&) {
            ++local.warnings;
        }
    }
    if (stats) *stats = local;
}

std::optional<std::pair<int64_t, GeoPoint>> resolve_geotag(const TweetRecord& t,
                                                           const Gazetteer& g,
                                                           double r_match_km) {
    if (t.coords) {
        const GazetteerEntry* e = g.nearest(*t.coords, r_match_km);
        if (!e) return std::nullopt;
        return std::make_pair(e->geoname_id, e->point);
    }
    if (t.bbox && !t.place_name.empty()) {
        double lat_lo = 90, lat_hi = -90, lon_lo = 180, lon_hi = -180;
        for (const auto& c : *t.bbox) {
            lat_lo = std::min(lat_lo, c.lat);
            lat_hi = std::max(lat_hi, c.lat);
            lon_lo = std::min(lon_lo, c.lon);
            lon_hi = std::max(lon_hi, c.lon);
        }
        const GazetteerEntry* best = nullptr;
        for (const GazetteerEntry* e : g.by_name(t.place_name)) {
            if (e->point.lat < lat_lo || e->point.lat > lat_hi ||
                e->point.lon < lon_lo || e->point.lon > lon_hi)
                continue;
            // ambiguity: largest population, then lowest geoname_id
            if (!best || e->population > best->population ||
                (e->population == best->population && e->geoname_id < best->geoname_id))
                best = e;
        }
        if (!best) return std::nullopt;
        return std::make_pair(best->geoname_id, best->point);
    }
    return std::nullopt;
}

std::optional<GroundTruth> assign_ground_truth(const UserRecord& u, const Gazetteer& g,
                                               double r_match_km) {
    std::map<int64_t, size_t> counts;
    std::map<int64_t, GeoPoint> points;
    for (const auto& t : u.tweets) {
        auto r = resolve_geotag(t, g, r_match_km);
        if (!r) continue;
        ++counts[r->first];
        points[r->first] = r->second;
    }
    if (counts.empty()) return std::nullopt;
    // modal city; ties go to the lowest geoname_id (map iteration order)
    int64_t best_city = 0;
    size_t best_count = 0;
    for (const auto& [city, cnt] : counts) {
        if (cnt > best_count) {
            best_city = city;
            best_count = cnt;
        }
    }
    return GroundTruth{u.user_id, best_city, points[best_city]};
}

std::vector<const GazetteerEntry*> match_profile_location(const std::string& profile,
                                                          const Gazetteer& g) {
    std::vector<std::string> toks;
    std::string cur;
    for (char ch : profile) {
        unsigned char c = static_cast<unsigned char>(ch);
        bool sep = std::isspace(c) || (std::ispunct(c) && c != '\'');
        if (sep) {
            if (!cur.empty()) toks.push_back(casefold(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) toks.push_back(casefold(cur));

    std::vector<const GazetteerEntry*> out;
    std::set<int64_t> seen;
    auto try_name = [&](const std::string& name) {
        for (const GazetteerEntry* e : g.by_name(name))
            if (seen.insert(e->geoname_id).second) out.push_back(e);
    };
    for (const auto& t : toks) try_name(t);
    for (size_t i = 0; i + 1 < toks.size(); ++i) try_name(toks[i] + " " + toks[i + 1]);
    std::sort(out.begin(), out.end(),
              [](auto* a, auto* b) { return a->geoname_id < b->geoname_id; });
    return out;
}

std::string DistanceCDF::to_csv() const {
    std::ostringstream os;
    os << "distance_km,cum_fraction\n";
    size_t n = sorted_km.size();
    for (size_t i = 0; i < n; ++i)
        os << sorted_km[i] << "," << static_cast<double>(i + 1) / static_cast<double>(n)
           << "\n";
    return os.str();
}

DistanceCDF profile_distance_report(const std::vector<UserRecord>& users,
                                    const std::vector<GroundTruth>& truths,
                                    const Gazetteer& g) {
    std::unordered_map<std::string, const GroundTruth*> truth_by_user;
    for (const auto& t : truths) truth_by_user[t.user_id] = &t;
    DistanceCDF cdf;
    for (const auto& u : users) {
        if (!u.profile_location) continue;
        auto it = truth_by_user.find(u.user_id);
        if (it == truth_by_user.end()) continue;
        auto matches = match_profile_location(*u.profile_location, g);
        if (matches.size() != 1) continue;  // unambiguous profiles only
        cdf.sorted_km.push_back(haversine_km(matches[0]->point, it->second->point));
    }
    std::sort(cdf.sorted_km.begin(), cdf.sorted_km.end());
    size_t n = cdf.sorted_km.size();
    if (n == 0) return cdf;
    auto frac_below = [&](double km) {
        size_t c = std::upper_bound(cdf.sorted_km.begin(), cdf.sorted_km.end(), km) -
                   cdf.sorted_km.begin();
        return static_cast<double>(c) / static_cast<double>(n);
    };
    cdf.frac_below_10km = frac_below(10.0);
    cdf.frac_below_161km = frac_below(161.0);
    for (double q : {0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) {
        size_t idx = std::min(n - 1, static_cast<size_t>(q * static_cast<double>(n)));
        cdf.quantiles.emplace_back(q, cdf.sorted_km[idx]);
    }
    return cdf;
}

}  // namespace geoloc
