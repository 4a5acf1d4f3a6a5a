#include "geoloc/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geoloc {

int NodeIndex::intern(const std::string& user_id) {
    auto [it, fresh] = internal_.try_emplace(user_id, static_cast<int>(internal_names_.size()));
    if (fresh) internal_names_.push_back(user_id);
    return it->second;
}

int NodeIndex::extern_col(const std::string& user_id) {
    auto [it, fresh] = external_.try_emplace(user_id, static_cast<int>(external_names_.size()));
    if (fresh) external_names_.push_back(user_id);
    return it->second;
}

int NodeIndex::internal_of(const std::string& user_id) const {
    auto it = internal_.find(user_id);
    return it == internal_.end() ? -1 : it->second;
}

int NodeIndex::external_of(const std::string& user_id) const {
    auto it = external_.find(user_id);
    return it == external_.end() ? -1 : it->second;
}

void WeightedAdjacency::add(int i, int j, double w) {
    auto& lst = adj_.at(i);
    auto it = std::lower_bound(lst.begin(), lst.end(), j,
                               [](const auto& p, int k) { return p.first < k; });
    if (it != lst.end() && it->first == j)
        it->second += w;
    else
        lst.insert(it, {j, w});
}

double WeightedAdjacency::get(int i, int j) const {
    const auto& lst = adj_.at(i);
    auto it = std::lower_bound(lst.begin(), lst.end(), j,
                               [](const auto& p, int k) { return p.first < k; });
    return (it != lst.end() && it->first == j) ? it->second : 0.0;
}

size_t WeightedAdjacency::nnz() const {
    size_t c = 0;
    for (const auto& lst : adj_)
        for (const auto& [j, w] : lst)
            if (w != 0.0) ++c;
    return c;
}

double WeightedAdjacency::weighted_degree(int i) const {
    double s = 0.0;
    for (const auto& [j, w] : adj_.at(i)) s += w;
    return s;
}

bool WeightedAdjacency::is_symmetric() const {
    for (int i = 0; i < n(); ++i)
        for (const auto& [j, w] : adj_[i])
            if (get(j, i) != w) return false;
    return true;
}

bool WeightedAdjacency::zero_diagonal() const {
    for (int i = 0; i < n(); ++i)
        if (get(i, i) != 0.0) return false;
    return true;
}

bool WeightedAdjacency::nonnegative() const {
    for (const auto& lst : adj_)
        for (const auto& [j, w] : lst)
            if (w < 0.0) return false;
    return true;
}

void BipartiteIncidence::ensure_cols(int cols) {
    if (cols > static_cast<int>(col_rows_.size())) col_rows_.resize(cols);
}

void BipartiteIncidence::set(int i, int e) {
    ensure_cols(e + 1);
    auto& cs = row_cols_.at(i);
    auto it = std::lower_bound(cs.begin(), cs.end(), e);
    if (it != cs.end() && *it == e) return;
    cs.insert(it, e);
    auto& rs = col_rows_.at(e);
    rs.insert(std::lower_bound(rs.begin(), rs.end(), i), i);
}

bool BipartiteIncidence::get(int i, int e) const {
    if (e >= cols()) return false;
    const auto& cs = row_cols_.at(i);
    return std::binary_search(cs.begin(), cs.end(), e);
}

std::pair<WeightedAdjacency, BipartiteIncidence> build_mention_matrices(
    const std::vector<UserRecord>& users, NodeIndex& index) {
    for (const auto& u : users) index.intern(u.user_id);
    WeightedAdjacency m(index.n());
    BipartiteIncidence xm(index.n(), 0);
    for (const auto& u : users) {
        int i = index.internal_of(u.user_id);
        for (const auto& t : u.tweets) {
            for (const auto& target : t.mentions) {
                int j = index.internal_of(target);
                if (j == i) continue;  // no self-loops
                if (j >= 0)
                    m.add(i, j, 1.0);
                else
                    xm.set(i, index.extern_col(target));
            }
        }
    }
    xm.ensure_cols(index.n_external());
    return {std::move(m), std::move(xm)};
}

std::pair<WeightedAdjacency, BipartiteIncidence> build_follower_matrices(
    const std::vector<UserRecord>& users, NodeIndex& index) {
    for (const auto& u : users) index.intern(u.user_id);
    WeightedAdjacency f(index.n());
    BipartiteIncidence xf(index.n(), 0);
    for (const auto& u : users) {
        int i = index.internal_of(u.user_id);
        for (const auto& target : u.followees) {
            int j = index.internal_of(target);
            if (j == i) continue;
            if (j >= 0) {
                if (f.get(i, j) == 0.0) f.add(i, j, 1.0);  // binary
            } else {
                xf.set(i, index.extern_col(target));
            }
        }
    }
    xf.ensure_cols(index.n_external());
    return {std::move(f), std::move(xf)};
}

std::pair<WeightedAdjacency, BipartiteIncidence> filter_popular(
    const WeightedAdjacency& a, const BipartiteIncidence& x, int threshold) {
    if (threshold < 1) throw std::invalid_argument("celebrity threshold must be >= 1");
    int n = a.n();
    std::vector<int> indeg(n, 0);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, w] : a.neighbors(i))
            if (w > 0.0) ++indeg[j];
    WeightedAdjacency fa(n);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, w] : a.neighbors(i))
            if (w > 0.0 && indeg[j] <= threshold) fa.add(i, j, w);
    BipartiteIncidence fx(x.rows(), x.cols());
    for (int e = 0; e < x.cols(); ++e) {
        const auto& rows = x.rows_of_col(e);
        if (static_cast<int>(rows.size()) > threshold) continue;
        for (int i : rows) fx.set(i, e);
    }
    return {std::move(fa), std::move(fx)};
}

namespace {

WeightedAdjacency add_cooccurrence(WeightedAdjacency y, const BipartiteIncidence& x) {
    // X X^T - diag, generated per external column
    for (int e = 0; e < x.cols(); ++e) {
        const auto& rows = x.rows_of_col(e);
        for (size_t a = 0; a < rows.size(); ++a) {
            for (size_t b = a + 1; b < rows.size(); ++b) {
                y.add(rows[a], rows[b], 1.0);
                y.add(rows[b], rows[a], 1.0);
            }
        }
    }
    return y;
}

}  // namespace

WeightedAdjacency extend_mention_network(const WeightedAdjacency& m,
                                         const BipartiteIncidence& xm) {
    WeightedAdjacency y(m.n());
    for (int i = 0; i < m.n(); ++i) {
        for (const auto& [j, w] : m.neighbors(i)) {
            if (w == 0.0 || j == i) continue;
            y.add(i, j, w);
            y.add(j, i, w);
        }
    }
    return add_cooccurrence(std::move(y), xm);
}

WeightedAdjacency extend_follower_network(const WeightedAdjacency& f,
                                          const BipartiteIncidence& xf) {
    WeightedAdjacency z(f.n());
    for (int i = 0; i < f.n(); ++i) {
        for (const auto& [j, w] : f.neighbors(i)) {
            if (w == 0.0 || j == i || j < i) continue;
            // F + F^T clipped at 1 per unordered pair
            z.add(i, j, 1.0);
            z.add(j, i, 1.0);
        }
    }
    for (int i = 0; i < f.n(); ++i) {
        for (const auto& [j, w] : f.neighbors(i)) {
            if (w == 0.0 || j >= i) continue;
            if (f.get(j, i) == 0.0) {  // not already added by the j < i pass
                z.add(i, j, 1.0);
                z.add(j, i, 1.0);
            }
        }
    }
    return add_cooccurrence(std::move(z), xf);
}

MultiplexGraph assemble_multiplex(
    std::vector<std::pair<std::string, WeightedAdjacency>> layers) {
    MultiplexGraph g;
    for (auto& [name, adj] : layers) {
        if (!g.layers.empty() && adj.n() != g.n())
            throw std::runtime_error("multiplex layer node-count mismatch: layer '" + name +
                                     "' has " + std::to_string(adj.n()) + " nodes, expected " +
                                     std::to_string(g.n()));
        g.layers.emplace_back(std::move(name), std::move(adj));
    }
    return g;
}

void save_multiplex(const MultiplexGraph& g, const NodeIndex& index,
                    const std::string& edges_path, const std::string& nodes_path,
                    const std::string& header_comment) {
    std::ofstream eo(edges_path);
    if (!eo) throw std::runtime_error("cannot write " + edges_path);
    if (!header_comment.empty()) eo << "# " << header_comment << "\n";
    eo.precision(17);
    for (const auto& [name, adj] : g.layers) {
        for (int i = 0; i < adj.n(); ++i)
            for (const auto& [j, w] : adj.neighbors(i))
                if (w != 0.0 && i < j)
                    eo << name << '\t' << i << '\t' << j << '\t' << w << '\n';
    }
    std::ofstream no(nodes_path);
    if (!no) throw std::runtime_error("cannot write " + nodes_path);
    if (!header_comment.empty()) no << "# " << header_comment << "\n";
    for (int i = 0; i < index.n(); ++i) no << i << '\t' << index.internal_name(i) << '\n';
}

std::pair<MultiplexGraph, std::vector<std::string>> load_multiplex(
    const std::string& edges_path, const std::string& nodes_path) {
    std::ifstream ni(nodes_path);
    if (!ni) throw std::runtime_error("cannot read " + nodes_path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(ni, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        size_t idx = std::stoul(line.substr(0, tab));
        if (idx != names.size()) throw std::runtime_error("node sidecar out of order");
        names.push_back(line.substr(tab + 1));
    }
    int n = static_cast<int>(names.size());

    std::ifstream ei(edges_path);
    if (!ei) throw std::runtime_error("cannot read " + edges_path);
    std::vector<std::pair<std::string, WeightedAdjacency>> layers;
    auto layer_of = [&](const std::string& name) -> WeightedAdjacency& {
        for (auto& [ln, adj] : layers)
            if (ln == name) return adj;
        layers.emplace_back(name, WeightedAdjacency(n));
        return layers.back().second;
    };
    while (std::getline(ei, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string name;
        int i, j;
        double w;
        std::getline(ss, name, '\t');
        ss >> i >> j >> w;
        auto& adj = layer_of(name);
        adj.add(i, j, w);
        adj.add(j, i, w);
    }
    return {assemble_multiplex(std::move(layers)), std::move(names)};
}

}  // namespace geoloc
