#pragma once

#include <string>
#include <vector>

#include "geoloc/geo.hpp"

namespace geoloc {

struct SynthConfig {
    int n_users = 1000;
    int n_cities = 5;
    std::vector<GeoPoint> city_centers;  // defaults laid out >= 500 km apart
    double p_in = 0.05;                  // intra-city mention edge probability
    double p_out = 0.001;                // inter-city mention edge probability
    int hubs_per_city = 3;               // external hub users
    double hub_attach_prob = 0.5;
    int tokens_per_user = 30;
    double liw_strength = 0.3;           // P(token from the city vocabulary)
    double jitter_km = 5.0;
    int shared_vocab = 200;
    int city_vocab = 25;
    uint64_t seed = 0;
};

/// Writes records.jsonl, profiles.jsonl and gazetteer.tsv in the exact ingest
/// formats. Deterministic given the seed.
void synth_generate(const SynthConfig& cfg, const std::string& records_path,
                    const std::string& profiles_path, const std::string& gazetteer_path);

}  // namespace geoloc
