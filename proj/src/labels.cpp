#include "geoloc/labels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geoloc {

namespace {

double coord(const GeoPoint& p, int dim) { return dim == 0 ? p.lat : p.lon; }

void split_node(KdTree& tree, int node_idx, std::vector<size_t>& members,
                size_t min_bucket) {
    KdNode& node = tree.nodes[node_idx];
    node.lat_lo = node.lon_lo = 1e300;
    node.lat_hi = node.lon_hi = -1e300;
    for (size_t m : members) {
        const GeoPoint& p = tree.points[m];
        node.lat_lo = std::min(node.lat_lo, p.lat);
        node.lat_hi = std::max(node.lat_hi, p.lat);
        node.lon_lo = std::min(node.lon_lo, p.lon);
        node.lon_hi = std::max(node.lon_hi, p.lon);
    }
    if (members.size() < 2 * min_bucket) {
        node.leaf = true;
        node.members = std::move(members);
        return;
    }
    int dim = (node.lat_hi - node.lat_lo >= node.lon_hi - node.lon_lo) ? 0 : 1;
    std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
        double ca = coord(tree.points[a], dim), cb = coord(tree.points[b], dim);
        if (ca != cb) return ca < cb;
        return a < b;
    });
    // lower median; points equal to the split value stay left
    double split_value = coord(tree.points[members[(members.size() - 1) / 2]], dim);
    std::vector<size_t> left, right;
    for (size_t m : members) {
        if (coord(tree.points[m], dim) <= split_value)
            left.push_back(m);
        else
            right.push_back(m);
    }
    if (left.size() < min_bucket || right.size() < min_bucket) {
        // duplicates prevented a balanced split; keep as (possibly large) leaf
        node.leaf = true;
        node.members = std::move(members);
        return;
    }
    node.leaf = false;
    node.split_dim = dim;
    node.split_value = split_value;
    members.clear();
    members.shrink_to_fit();
    int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    int ri = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_idx].left = li;
    tree.nodes[node_idx].right = ri;
    split_node(tree, li, left, min_bucket);
    split_node(tree, ri, right, min_bucket);
}

}  // namespace

KdTree build_kdtree(const std::vector<GeoPoint>& points, size_t min_bucket) {
    if (points.empty()) throw std::invalid_argument("build_kdtree: no points");
    if (min_bucket < 1) throw std::invalid_argument("build_kdtree: min_bucket < 1");
    KdTree tree;
    tree.points = points;
    tree.nodes.emplace_back();
    std::vector<size_t> all(points.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    split_node(tree, 0, all, min_bucket);
    return tree;
}

std::vector<int> KdTree::leaf_ids() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
        if (nodes[i].leaf) out.push_back(i);
    return out;
}

int KdTree::locate(const GeoPoint& p) const {
    int cur = 0;
    while (!nodes[cur].leaf) {
        double c = nodes[cur].split_dim == 0 ? p.lat : p.lon;
        cur = c <= nodes[cur].split_value ? nodes[cur].left : nodes[cur].right;
    }
    return cur;
}

GeoPoint representative_point(const std::vector<GeoPoint>& members) {
    if (members.empty())
        throw std::invalid_argument("representative_point: empty member list");
    auto median = [&](int dim) {
        std::vector<double> v;
        v.reserve(members.size());
        for (const auto& p : members) v.push_back(dim == 0 ? p.lat : p.lon);
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];  // lower median
    };
    return GeoPoint{median(0), median(1)};
}

LabelSpace build_city_labels(const std::vector<GroundTruth>& truths, size_t min_users,
                             const Gazetteer& g) {
    std::map<int64_t, std::vector<const GroundTruth*>> by_city;
    for (const auto& t : truths) by_city[t.city].push_back(&t);
    LabelSpace ls;
    ls.mode = LabelMode::city;
    for (const auto& [city, members] : by_city) {
        if (members.size() < min_users) {
            ls.excluded_users += members.size();
            continue;
        }
        LabelClass cls;
        cls.label_id = ls.num_labels();
        const GazetteerEntry* e = g.by_id(city);
        cls.representative = e ? e->point : members.front()->point;
        cls.member_count = members.size();
        for (const auto* t : members) ls.assignment[t->user_id] = cls.label_id;
        ls.classes.push_back(cls);
    }
    if (ls.classes.empty())
        throw std::runtime_error("build_city_labels: no city reaches min_users=" +
                                 std::to_string(min_users));
    return ls;
}

LabelSpace build_kdtree_labels(const std::vector<GroundTruth>& truths, size_t min_bucket) {
    if (truths.empty()) throw std::runtime_error("build_kdtree_labels: no ground truths");
    std::vector<const GroundTruth*> sorted;
    for (const auto& t : truths) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->user_id < b->user_id; });
    std::vector<GeoPoint> pts;
    pts.reserve(sorted.size());
    for (const auto* t : sorted) pts.push_back(t->point);
    KdTree tree = build_kdtree(pts, min_bucket);
    LabelSpace ls;
    ls.mode = LabelMode::kdtree;
    for (int leaf : tree.leaf_ids()) {
        const KdNode& node = tree.nodes[leaf];
        std::vector<GeoPoint> members;
        for (size_t m : node.members) members.push_back(pts[m]);
        LabelClass cls;
        cls.label_id = ls.num_labels();
        cls.representative = representative_point(members);
        cls.member_count = members.size();
        for (size_t m : node.members) ls.assignment[sorted[m]->user_id] = cls.label_id;
        ls.classes.push_back(cls);
    }
    return ls;
}

void LabelSpace::save_csv(const std::string& labels_path,
                          const std::string& assignment_path,
                          const std::string& header_comment) const {
    std::ofstream lo(labels_path);
    if (!lo) throw std::runtime_error("cannot write " + labels_path);
    lo.precision(17);
    if (!header_comment.empty()) lo << "# " << header_comment << "\n";
    lo << "label_id,mode,rep_lat,rep_lon,count\n";
    for (const auto& c : classes)
        lo << c.label_id << ',' << (mode == LabelMode::city ? "city" : "kdtree") << ','
           << c.representative.lat << ',' << c.representative.lon << ','
           << c.member_count << '\n';
    std::ofstream ao(assignment_path);
    if (!ao) throw std::runtime_error("cannot write " + assignment_path);
    if (!header_comment.empty()) ao << "# " << header_comment << "\n";
    ao << "user_id,label_id\n";
    std::vector<std::pair<std::string, int>> rows(assignment.begin(), assignment.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [uid, lid] : rows) ao << uid << ',' << lid << '\n';
}

LabelSpace LabelSpace::load_csv(const std::string& labels_path,
                                const std::string& assignment_path) {
    std::ifstream li(labels_path);
    if (!li) throw std::runtime_error("cannot read " + labels_path);
    LabelSpace ls;
    std::string line;
    bool header_seen = false;
    while (std::getline(li, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string f;
        LabelClass c;
        std::getline(ss, f, ',');
        c.label_id = std::stoi(f);
        std::getline(ss, f, ',');
        ls.mode = f == "city" ? LabelMode::city : LabelMode::kdtree;
        std::getline(ss, f, ',');
        c.representative.lat = std::stod(f);
        std::getline(ss, f, ',');
        c.representative.lon = std::stod(f);
        std::getline(ss, f, ',');
        c.member_count = std::stoul(f);
        ls.classes.push_back(c);
    }
    std::ifstream ai(assignment_path);
    if (!ai) throw std::runtime_error("cannot read " + assignment_path);
    header_seen = false;
    while (std::getline(ai, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        auto comma = line.rfind(',');
        ls.assignment[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    }
    return ls;
}

}  // namespace geoloc
