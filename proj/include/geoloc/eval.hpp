#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "geoloc/geo.hpp"
#include "geoloc/ingest.hpp"
#include "geoloc/labels.hpp"

namespace geoloc {

struct FoldMetrics {
    double acc_at_100 = 0.0;
    double mean_km = 0.0;
    double median_km = 0.0;
    size_t n_evaluated = 0;
    size_t n_excluded = 0;  // users without ground truth
};

struct EvalReport {
    FoldMetrics overall;
    std::vector<FoldMetrics> folds;
    double acc_std = 0.0;   // across folds
    double mean_std = 0.0;
    double median_std = 0.0;
    std::vector<double> sorted_errors_km;

    std::string to_json(const std::string& model_name, uint64_t config_hash) const;
    std::string to_table(const std::string& model_name) const;
    std::string error_cdf_csv() const;
};

/// error_u = haversine(rep(pred_u), truth_u); Acc@100 counts errors
/// <= 160.9344 km (boundary inclusive).
FoldMetrics evaluate(const std::vector<std::pair<std::string, int>>& predictions,
                     const LabelSpace& labels,
                     const std::unordered_map<std::string, GeoPoint>& truth_points,
                     std::vector<double>* errors_out = nullptr);

/// Stratified k-fold assignment: returns fold id per element; classes with
/// fewer than k members are dropped (fold id -1).
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed);

EvalReport aggregate_folds(std::vector<FoldMetrics> folds, std::vector<double> all_errors);

}  // namespace geoloc
