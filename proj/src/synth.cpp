#include "geoloc/synth.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "geoloc/rng.hpp"

namespace geoloc {

using nlohmann::ordered_json;

namespace {

std::vector<GeoPoint> default_centers(int n_cities) {
    // grid spaced ~6 degrees latitude / 8 longitude, >= 500 km apart
    std::vector<GeoPoint> centers;
    for (int c = 0; c < n_cities; ++c) {
        int row = c / 4, col = c % 4;
        centers.push_back(GeoPoint{-40.0 + 6.0 * row, -70.0 + 8.0 * col});
    }
    return centers;
}

}  // namespace

void synth_generate(const SynthConfig& cfg, const std::string& records_path,
                    const std::string& profiles_path, const std::string& gazetteer_path) {
    if (cfg.n_users < cfg.n_cities || cfg.n_cities < 2)
        throw std::invalid_argument("synth: need n_users >= n_cities >= 2");
    std::vector<GeoPoint> centers =
        cfg.city_centers.empty() ? default_centers(cfg.n_cities) : cfg.city_centers;
    if (static_cast<int>(centers.size()) != cfg.n_cities)
        throw std::invalid_argument("synth: center count != n_cities");

    Rng rng(cfg.seed);
    auto user_name = [](int u) { return "u" + std::to_string(u); };
    auto hub_name = [](int c, int k) {
        return "hub_c" + std::to_string(c) + "_" + std::to_string(k);
    };
    std::vector<int> city_of(cfg.n_users);
    for (int u = 0; u < cfg.n_users; ++u) city_of[u] = u % cfg.n_cities;

    // planted-partition mention edges (directed i -> j)
    std::vector<std::vector<int>> mentions_of(cfg.n_users);
    for (int i = 0; i < cfg.n_users; ++i) {
        for (int j = i + 1; j < cfg.n_users; ++j) {
            double p = city_of[i] == city_of[j] ? cfg.p_in : cfg.p_out;
            if (rng.uniform() < p) {
                if (rng.uniform() < 0.5)
                    mentions_of[i].push_back(j);
                else
                    mentions_of[j].push_back(i);
            }
        }
    }
    std::vector<std::vector<int>> hubs_of(cfg.n_users);   // mention hubs
    std::vector<std::vector<int>> fhubs_of(cfg.n_users);  // followed hubs
    for (int u = 0; u < cfg.n_users; ++u) {
        for (int k = 0; k < cfg.hubs_per_city; ++k) {
            if (rng.uniform() < cfg.hub_attach_prob) hubs_of[u].push_back(k);
            if (rng.uniform() < cfg.hub_attach_prob) fhubs_of[u].push_back(k);
        }
    }
    std::vector<std::vector<int>> follows_of(cfg.n_users);
    for (int i = 0; i < cfg.n_users; ++i) {
        for (int j = 0; j < cfg.n_users; ++j) {
            if (i == j) continue;
            double p = city_of[i] == city_of[j] ? cfg.p_in : cfg.p_out;
            if (rng.uniform() < p / 2.0) follows_of[i].push_back(j);
        }
    }

    std::ofstream rec(records_path);
    if (!rec) throw std::runtime_error("cannot write " + records_path);
    long tweet_counter = 0;
    double jitter_deg = cfg.jitter_km / 111.0;
    for (int u = 0; u < cfg.n_users; ++u) {
        int c = city_of[u];
        int64_t ts = 1560000000 + u;

        // one geotagged tweet at a jittered city center
        ordered_json geo;
        geo["tweet_id"] = "t" + std::to_string(tweet_counter++);
        geo["user_id"] = user_name(u);
        geo["text"] = "checkin";
        geo["lat"] = centers[c].lat + rng.uniform(-jitter_deg, jitter_deg);
        geo["lon"] = centers[c].lon + rng.uniform(-jitter_deg, jitter_deg);
        geo["ts"] = ts++;
        rec << geo.dump() << "\n";

        // content tweets mixing shared and city-specific vocabulary
        std::string text;
        for (int t = 0; t < cfg.tokens_per_user; ++t) {
            if (!text.empty()) text += ' ';
            if (rng.uniform() < cfg.liw_strength)
                text += "city" + std::to_string(c) + "tok" +
                        std::to_string(rng.uniform_int(cfg.city_vocab));
            else
                text += "word" + std::to_string(rng.uniform_int(cfg.shared_vocab));
        }
        ordered_json content;
        content["tweet_id"] = "t" + std::to_string(tweet_counter++);
        content["user_id"] = user_name(u);
        content["text"] = text;
        content["ts"] = ts++;
        rec << content.dump() << "\n";

        // mention tweets (internal targets and external hubs)
        auto mention_tweet = [&](const std::string& target) {
            ordered_json m;
            m["tweet_id"] = "t" + std::to_string(tweet_counter++);
            m["user_id"] = user_name(u);
            m["text"] = "@" + target + " hola";
            m["mentions"] = std::vector<std::string>{target};
            m["ts"] = ts++;
            rec << m.dump() << "\n";
        };
        for (int j : mentions_of[u]) mention_tweet(user_name(j));
        for (int k : hubs_of[u]) mention_tweet(hub_name(c, k));
    }
    rec.close();

    std::ofstream prof(profiles_path);
    if (!prof) throw std::runtime_error("cannot write " + profiles_path);
    for (int u = 0; u < cfg.n_users; ++u) {
        int c = city_of[u];
        ordered_json j;
        j["user_id"] = user_name(u);
        if (u % 2 == 0) j["profile_location"] = "City" + std::to_string(c);
        std::vector<std::string> followees;
        for (int v : follows_of[u]) followees.push_back(user_name(v));
        for (int k : fhubs_of[u]) followees.push_back(hub_name(c, k));
        j["followees"] = followees;
        prof << j.dump() << "\n";
    }
    prof.close();

    // GeoNames-shaped gazetteer: one city per center
    std::ofstream gaz(gazetteer_path);
    if (!gaz) throw std::runtime_error("cannot write " + gazetteer_path);
    gaz.precision(17);
    for (int c = 0; c < cfg.n_cities; ++c) {
        gaz << (1000 + c) << '\t' << "City" << c << '\t' << "City" << c << '\t' << ""
            << '\t' << centers[c].lat << '\t' << centers[c].lon << '\t' << "P" << '\t'
            << "PPL" << '\t' << "AA" << '\t' << "" << '\t' << "" << '\t' << "" << '\t'
            << "" << '\t' << "" << '\t' << (100000 + c) << '\t' << "" << '\t' << ""
            << '\t' << "" << '\t' << "" << '\n';
    }
}

}  // namespace geoloc
