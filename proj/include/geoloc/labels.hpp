#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "geoloc/ingest.hpp"

namespace geoloc {

enum class LabelMode { city, kdtree };

struct LabelClass {
    int label_id = 0;
    GeoPoint representative;
    size_t member_count = 0;
};

struct LabelSpace {
    LabelMode mode = LabelMode::city;
    std::vector<LabelClass> classes;
    std::unordered_map<std::string, int> assignment;  // user_id -> label_id
    size_t excluded_users = 0;

    int num_labels() const { return static_cast<int>(classes.size()); }
    void save_csv(const std::string& labels_path, const std::string& assignment_path,
                  const std::string& header_comment = "") const;
    static LabelSpace load_csv(const std::string& labels_path,
                               const std::string& assignment_path);
};

struct KdNode {
    bool leaf = true;
    int split_dim = 0;        // 0 = lat, 1 = lon
    double split_value = 0.0;
    int left = -1, right = -1;
    double lat_lo = 0, lat_hi = 0, lon_lo = 0, lon_hi = 0;
    std::vector<size_t> members;  // indices into the input point list (leaves only)
};

struct KdTree {
    std::vector<KdNode> nodes;  // nodes[0] is the root
    std::vector<GeoPoint> points;

    std::vector<int> leaf_ids() const;
    /// Leaf containing p (points on a split boundary go left).
    int locate(const GeoPoint& p) const;
};

/// Recursive median split on the wider dimension; a split is taken only when
/// both children would hold >= min_bucket points.
KdTree build_kdtree(const std::vector<GeoPoint>& points, size_t min_bucket);

/// One class per city with >= min_users members; users elsewhere excluded.
LabelSpace build_city_labels(const std::vector<GroundTruth>& truths, size_t min_users,
                             const Gazetteer& g);

/// Leaf classes of a k-d tree over the users' ground-truth points.
LabelSpace build_kdtree_labels(const std::vector<GroundTruth>& truths, size_t min_bucket);

/// Componentwise median of member coordinates.
GeoPoint representative_point(const std::vector<GeoPoint>& members);

}  // namespace geoloc
