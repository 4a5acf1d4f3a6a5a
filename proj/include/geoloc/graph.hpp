#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "geoloc/ingest.hpp"

namespace geoloc {

/// Bijections user_id <-> dense index, kept separately for internal users
/// (the dataset) and external users (mentioned/followed only).
class NodeIndex {
public:
    int intern(const std::string& user_id);        // add-or-get internal index
    int extern_col(const std::string& user_id);    // add-or-get external index
    int internal_of(const std::string& user_id) const;  // -1 if absent
    int external_of(const std::string& user_id) const;  // -1 if absent
    bool is_internal(const std::string& user_id) const { return internal_of(user_id) >= 0; }

    int n() const { return static_cast<int>(internal_names_.size()); }
    int n_external() const { return static_cast<int>(external_names_.size()); }
    const std::string& internal_name(int i) const { return internal_names_[i]; }
    const std::string& external_name(int e) const { return external_names_[e]; }

private:
    std::unordered_map<std::string, int> internal_;
    std::unordered_map<std::string, int> external_;
    std::vector<std::string> internal_names_;
    std::vector<std::string> external_names_;
};

/// Sparse weighted graph over n nodes with sorted per-node neighbor lists.
class WeightedAdjacency {
public:
    WeightedAdjacency() = default;
    explicit WeightedAdjacency(int n) : adj_(n) {}

    int n() const { return static_cast<int>(adj_.size()); }
    void add(int i, int j, double w);          // accumulates
    double get(int i, int j) const;
    const std::vector<std::pair<int, double>>& neighbors(int i) const { return adj_[i]; }
    size_t nnz() const;
    double weighted_degree(int i) const;

    bool is_symmetric() const;
    bool zero_diagonal() const;
    bool nonnegative() const;

private:
    // neighbor lists stay sorted by index
    std::vector<std::vector<std::pair<int, double>>> adj_;
};

/// Binary incidence between n internal users and external columns.
class BipartiteIncidence {
public:
    BipartiteIncidence() = default;
    BipartiteIncidence(int rows, int cols) : row_cols_(rows), col_rows_(cols) {}

    int rows() const { return static_cast<int>(row_cols_.size()); }
    int cols() const { return static_cast<int>(col_rows_.size()); }
    void set(int i, int e);                    // idempotent (binary entries)
    bool get(int i, int e) const;
    const std::vector<int>& rows_of_col(int e) const { return col_rows_[e]; }
    const std::vector<int>& cols_of_row(int i) const { return row_cols_[i]; }
    void ensure_cols(int cols);

private:
    std::vector<std::vector<int>> row_cols_;
    std::vector<std::vector<int>> col_rows_;
};

struct MultiplexGraph {
    std::vector<std::pair<std::string, WeightedAdjacency>> layers;
    int n() const { return layers.empty() ? 0 : layers.front().second.n(); }
};

/// Directed mention counts M plus binary incidence X_M to external users.
std::pair<WeightedAdjacency, BipartiteIncidence> build_mention_matrices(
    const std::vector<UserRecord>& users, NodeIndex& index);

/// Binary directed follower matrix F plus incidence X_F.
std::pair<WeightedAdjacency, BipartiteIncidence> build_follower_matrices(
    const std::vector<UserRecord>& users, NodeIndex& index);

/// Zeroes incoming entries of every target (internal column or external
/// column) with more than `threshold` distinct in-linking users.
std::pair<WeightedAdjacency, BipartiteIncidence> filter_popular(
    const WeightedAdjacency& a, const BipartiteIncidence& x, int threshold);

/// Y = (M + M^T) + (X_M X_M^T - diag).
WeightedAdjacency extend_mention_network(const WeightedAdjacency& m,
                                         const BipartiteIncidence& xm);

/// Z = clip1(F + F^T) + (X_F X_F^T - diag), undirected weighted.
WeightedAdjacency extend_follower_network(const WeightedAdjacency& f,
                                          const BipartiteIncidence& xf);

MultiplexGraph assemble_multiplex(
    std::vector<std::pair<std::string, WeightedAdjacency>> layers);

/// Tab-separated edge list `layer src dst weight` (undirected edges stored
/// once with src < dst) plus a `idx user_id` node sidecar. Lossless.
void save_multiplex(const MultiplexGraph& g, const NodeIndex& index,
                    const std::string& edges_path, const std::string& nodes_path,
                    const std::string& header_comment = "");
std::pair<MultiplexGraph, std::vector<std::string>> load_multiplex(
    const std::string& edges_path, const std::string& nodes_path);

}  // namespace geoloc
