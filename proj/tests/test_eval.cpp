#include <doctest.h>

#include <algorithm>
#include <map>

#include "geoloc/eval.hpp"
#include "geoloc/rng.hpp"

using namespace geoloc;

namespace {

// label space whose class representatives sit exactly `km` east of the origin
LabelSpace space_at_km(const std::vector<double>& km) {
    double deg_per_km = 360.0 / (2.0 * M_PI * kEarthRadiusKm);
    LabelSpace ls;
    for (size_t i = 0; i < km.size(); ++i)
        ls.classes.push_back(
            LabelClass{static_cast<int>(i), GeoPoint{0.0, km[i] * deg_per_km}, 1});
    return ls;
}

}  // namespace

TEST_CASE("evaluate metrics from hand-computed distances") {
    LabelSpace ls = space_at_km({0, 100, 200, 1000});
    std::unordered_map<std::string, GeoPoint> truth;
    std::vector<std::pair<std::string, int>> preds;
    for (int i = 0; i < 4; ++i) {
        std::string u = "u" + std::to_string(i);
        truth[u] = GeoPoint{0, 0};
        preds.emplace_back(u, i);
    }
    FoldMetrics m = evaluate(preds, ls, truth);
    CHECK(m.n_evaluated == 4);
    CHECK(m.acc_at_100 == doctest::Approx(0.5));
    CHECK(m.mean_km == doctest::Approx(325.0).epsilon(1e-9));
    CHECK(m.median_km == doctest::Approx(150.0).epsilon(1e-9));

    // permutation invariance
    std::reverse(preds.begin(), preds.end());
    FoldMetrics m2 = evaluate(preds, ls, truth);
    CHECK(m2.acc_at_100 == m.acc_at_100);
    CHECK(m2.mean_km == doctest::Approx(m.mean_km));
    CHECK(m2.median_km == doctest::Approx(m.median_km));
}

TEST_CASE("acc@100 boundary is inclusive at 160.9344 km") {
    LabelSpace ls = space_at_km({160.9344, 160.9345});
    std::unordered_map<std::string, GeoPoint> truth = {{"a", {0, 0}}, {"b", {0, 0}}};
    FoldMetrics at = evaluate({{"a", 0}}, ls, truth);
    CHECK(at.acc_at_100 == doctest::Approx(1.0));
    FoldMetrics over = evaluate({{"b", 1}}, ls, truth);
    CHECK(over.acc_at_100 == doctest::Approx(0.0));
}

TEST_CASE("users without ground truth are excluded and counted") {
    LabelSpace ls = space_at_km({0});
    std::unordered_map<std::string, GeoPoint> truth = {{"known", {0, 0}}};
    FoldMetrics m = evaluate({{"known", 0}, {"mystery", 0}}, ls, truth);
    CHECK(m.n_evaluated == 1);
    CHECK(m.n_excluded == 1);

    CHECK_THROWS(evaluate({{"known", 5}}, ls, truth));  // outside label space
}

TEST_CASE("stratified folds preserve proportions and drop small classes") {
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) labels.push_back(0);
    for (int i = 0; i < 30; ++i) labels.push_back(1);
    for (int i = 0; i < 3; ++i) labels.push_back(2);  // fewer than k members

    auto folds = stratified_folds(labels, 5, 42);
    REQUIRE(folds.size() == labels.size());
    std::map<std::pair<int, int>, int> count;  // (label, fold) -> members
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 2) {
            CHECK(folds[i] == -1);
            continue;
        }
        CHECK(folds[i] >= 0);
        CHECK(folds[i] < 5);
        ++count[{labels[i], folds[i]}];
    }
    for (int f = 0; f < 5; ++f) {
        CHECK(std::abs(count[{0, f}] - 10) <= 1);
        CHECK(std::abs(count[{1, f}] - 6) <= 1);
    }

    CHECK(stratified_folds(labels, 5, 42) == folds);  // deterministic
    CHECK(stratified_folds(labels, 5, 43) != folds);
    CHECK_THROWS(stratified_folds(labels, 1, 0));
}

TEST_CASE("aggregate_folds overall metrics and std") {
    FoldMetrics f;
    f.acc_at_100 = 0.5;
    f.mean_km = 100;
    f.median_km = 80;
    f.n_evaluated = 2;
    EvalReport r = aggregate_folds({f, f}, {0.0, 50.0, 150.0, 200.0});
    CHECK(r.acc_std == 0.0);
    CHECK(r.mean_std == 0.0);
    CHECK(r.overall.n_evaluated == 4);
    CHECK(r.overall.mean_km == doctest::Approx(100.0));
    CHECK(r.overall.median_km == doctest::Approx(100.0));
    CHECK(r.overall.acc_at_100 == doctest::Approx(0.75));  // 0, 50, 150 within 160.93

    std::string json = r.to_json("test_model", 42);
    CHECK(json.find("\"acc_at_100\"") != std::string::npos);
    CHECK(json.find("stratified") != std::string::npos);
    std::string csv = r.error_cdf_csv();
    CHECK(csv.find("distance_km,cum_fraction") == 0);
    CHECK(r.to_table("m").find("Acc@100") != std::string::npos);
}
