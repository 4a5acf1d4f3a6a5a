#include "geoloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "geoloc/rng.hpp"

namespace geoloc {

FoldMetrics evaluate(const std::vector<std::pair<std::string, int>>& predictions,
                     const LabelSpace& labels,
                     const std::unordered_map<std::string, GeoPoint>& truth_points,
                     std::vector<double>* errors_out) {
    FoldMetrics m;
    std::vector<double> errors;
    for (const auto& [user_id, label_id] : predictions) {
        auto it = truth_points.find(user_id);
        if (it == truth_points.end()) {
            ++m.n_excluded;
            continue;
        }
        if (label_id < 0 || label_id >= labels.num_labels())
            throw std::runtime_error("evaluate: prediction outside label space");
        errors.push_back(
            haversine_km(labels.classes[label_id].representative, it->second));
    }
    m.n_evaluated = errors.size();
    if (errors.empty()) return m;
    size_t hits = 0;
    double total = 0.0;
    for (double e : errors) {
        if (e <= kAcc100ThresholdKm) ++hits;
        total += e;
    }
    m.acc_at_100 = static_cast<double>(hits) / static_cast<double>(errors.size());
    m.mean_km = total / static_cast<double>(errors.size());
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    m.median_km = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    if (errors_out) *errors_out = std::move(errors);
    return m;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_folds: k must be >= 2");
    std::map<int, std::vector<size_t>> by_label;
    for (size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
    std::vector<int> fold(labels.size(), -1);
    Rng rng(seed);
    for (auto& [label, members] : by_label) {
        if (static_cast<int>(members.size()) < k) continue;  // dropped with warning upstream
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i)
            fold[members[i]] = static_cast<int>(i % k);
    }
    return fold;
}

EvalReport aggregate_folds(std::vector<FoldMetrics> folds, std::vector<double> all_errors) {
    EvalReport r;
    r.folds = std::move(folds);
    std::sort(all_errors.begin(), all_errors.end());
    r.sorted_errors_km = std::move(all_errors);

    size_t n = r.sorted_errors_km.size();
    r.overall.n_evaluated = n;
    for (const auto& f : r.folds) r.overall.n_excluded += f.n_excluded;
    if (n) {
        size_t hits = 0;
        double total = 0.0;
        for (double e : r.sorted_errors_km) {
            if (e <= kAcc100ThresholdKm) ++hits;
            total += e;
        }
        r.overall.acc_at_100 = static_cast<double>(hits) / static_cast<double>(n);
        r.overall.mean_km = total / static_cast<double>(n);
        r.overall.median_km = n % 2 ? r.sorted_errors_km[n / 2]
                                    : 0.5 * (r.sorted_errors_km[n / 2 - 1] +
                                             r.sorted_errors_km[n / 2]);
    }
    auto stddev = [&](auto get) {
        if (r.folds.size() < 2) return 0.0;
        double mean = 0.0;
        for (const auto& f : r.folds) mean += get(f);
        mean /= static_cast<double>(r.folds.size());
        double var = 0.0;
        for (const auto& f : r.folds) var += (get(f) - mean) * (get(f) - mean);
        return std::sqrt(var / static_cast<double>(r.folds.size() - 1));
    };
    r.acc_std = stddev([](const FoldMetrics& f) { return f.acc_at_100; });
    r.mean_std = stddev([](const FoldMetrics& f) { return f.mean_km; });
    r.median_std = stddev([](const FoldMetrics& f) { return f.median_km; });
    return r;
}

std::string EvalReport::to_json(const std::string& model_name, uint64_t config_hash) const {
    nlohmann::ordered_json j;
    j["model"] = model_name;
    j["config_hash"] = config_hash;
    j["protocol"] = "stratified " + std::to_string(folds.size()) + "-fold cross-validation";
    j["acc_at_100"] = overall.acc_at_100;
    j["mean_km"] = overall.mean_km;
    j["median_km"] = overall.median_km;
    j["acc_std"] = acc_std;
    j["mean_std"] = mean_std;
    j["median_std"] = median_std;
    j["n_evaluated"] = overall.n_evaluated;
    j["n_excluded"] = overall.n_excluded;
    auto& jf = j["folds"];
    for (const auto& f : folds) {
        nlohmann::ordered_json e;
        e["acc_at_100"] = f.acc_at_100;
        e["mean_km"] = f.mean_km;
        e["median_km"] = f.median_km;
        e["n"] = f.n_evaluated;
        jf.push_back(e);
    }
    return j.dump(2);
}

std::string EvalReport::to_table(const std::string& model_name) const {
    std::ostringstream os;
    os.precision(4);
    os << "Method\tAcc@100\tMean\tMedian\n";
    os << model_name << '\t' << overall.acc_at_100 << '\t' << overall.mean_km << '\t'
       << overall.median_km << '\n';
    return os.str();
}

std::string EvalReport::error_cdf_csv() const {
    std::ostringstream os;
    os << "distance_km,cum_fraction\n";
    size_t n = sorted_errors_km.size();
    for (size_t i = 0; i < n; ++i)
        os << sorted_errors_km[i] << ','
           << static_cast<double>(i + 1) / static_cast<double>(n) << '\n';
    return os.str();
}

}  // namespace geoloc
