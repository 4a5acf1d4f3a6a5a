#include <doctest.h>

#include <Eigen/Dense>

#include "geoloc/graph.hpp"
#include "geoloc/rng.hpp"
#include "helpers.hpp"

using namespace geoloc;
using Eigen::MatrixXd;

namespace {

MatrixXd dense_of(const WeightedAdjacency& a) {
    MatrixXd m = MatrixXd::Zero(a.n(), a.n());
    for (int i = 0; i < a.n(); ++i)
        for (const auto& [j, w] : a.neighbors(i)) m(i, j) = w;
    return m;
}

MatrixXd dense_of(const BipartiteIncidence& x) {
    MatrixXd m = MatrixXd::Zero(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int e : x.cols_of_row(i)) m(i, e) = 1.0;
    return m;
}

// dense reference: Y = (M + M^T) + (X X^T - diag)
MatrixXd extended_oracle(const MatrixXd& m, const MatrixXd& x, bool clip_sym) {
    MatrixXd sym = m + m.transpose();
    if (clip_sym) sym = sym.cwiseMin(1.0);
    MatrixXd co = x * x.transpose();
    co.diagonal().setZero();
    return sym + co;
}

std::pair<WeightedAdjacency, BipartiteIncidence> random_fixture(Rng& rng, int n, int ext,
                                                               bool binary) {
    WeightedAdjacency m(n);
    BipartiteIncidence x(n, ext);
    int edges = static_cast<int>(rng.uniform_int(3 * n + 1));
    for (int k = 0; k < edges; ++k) {
        int i = static_cast<int>(rng.uniform_int(n));
        int j = static_cast<int>(rng.uniform_int(n));
        if (i == j) continue;
        m.add(i, j, binary ? 1.0 : 1.0 + static_cast<double>(rng.uniform_int(5)));
    }
    int links = static_cast<int>(rng.uniform_int(2 * n + 1));
    for (int k = 0; k < links && ext > 0; ++k)
        x.set(static_cast<int>(rng.uniform_int(n)), static_cast<int>(rng.uniform_int(ext)));
    return {std::move(m), std::move(x)};
}

void check_extended_invariants(const WeightedAdjacency& y) {
    CHECK(y.is_symmetric());
    CHECK(y.zero_diagonal());
    CHECK(y.nonnegative());
}

}  // namespace

TEST_CASE("mention matrices from user records") {
    std::vector<UserRecord> users(2);
    users[0].user_id = "u1";
    users[1].user_id = "u2";
    auto mention = [](const std::string& who) {
        TweetRecord t;
        t.mentions = {who};
        return t;
    };
    users[0].tweets = {mention("u2"), mention("u2"), mention("u2"), mention("ext"),
                       mention("ext")};
    users[1].tweets = {mention("u1")};

    NodeIndex idx;
    auto [m, x] = build_mention_matrices(users, idx);
    int i1 = idx.internal_of("u1"), i2 = idx.internal_of("u2");
    CHECK(m.get(i1, i2) == 3.0);
    CHECK(m.get(i2, i1) == 1.0);
    int e = idx.external_of("ext");
    REQUIRE(e >= 0);
    CHECK(x.get(i1, e));  // binary despite two mentions
    CHECK_FALSE(x.get(i2, e));
    CHECK(idx.internal_of("ext") == -1);  // strict internal/external partition

    auto y = extend_mention_network(m, x);
    CHECK(y.get(i1, i2) == 4.0);
    check_extended_invariants(y);
}

TEST_CASE("extended mention network equals the dense formula on random fixtures") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(49));
        int ext = static_cast<int>(rng.uniform_int(51));
        auto [m, x] = random_fixture(rng, n, ext, false);
        WeightedAdjacency y = extend_mention_network(m, x);
        MatrixXd want = extended_oracle(dense_of(m), dense_of(x), false);
        CHECK(dense_of(y) == want);
        check_extended_invariants(y);
    }
}

TEST_CASE("extended follower network equals the dense clip-1 formula") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(49));
        int ext = static_cast<int>(rng.uniform_int(51));
        auto [f, x] = random_fixture(rng, n, ext, true);
        WeightedAdjacency z = extend_follower_network(f, x);
        MatrixXd want = extended_oracle(dense_of(f), dense_of(x), true);
        CHECK(dense_of(z) == want);
        check_extended_invariants(z);
    }
}

TEST_CASE("co-mention example: shared external contacts") {
    WeightedAdjacency m(3);
    BipartiteIncidence x(3, 2);
    x.set(0, 0);
    x.set(0, 1);
    x.set(1, 0);
    x.set(1, 1);
    x.set(2, 1);
    auto y = extend_mention_network(m, x);
    CHECK(y.get(0, 1) == 2.0);
    CHECK(y.get(0, 2) == 1.0);
    CHECK(y.get(1, 2) == 1.0);
    CHECK(y.get(0, 0) == 0.0);
}

TEST_CASE("co-follow example") {
    WeightedAdjacency f(2);
    BipartiteIncidence x(2, 3);
    for (int e = 0; e < 3; ++e) {
        x.set(0, e);
        x.set(1, e);
    }
    auto z = extend_follower_network(f, x);
    CHECK(z.get(0, 1) == 3.0);

    // single follow edge symmetrizes to weight 1
    WeightedAdjacency f2(2);
    f2.add(0, 1, 1.0);
    auto z2 = extend_follower_network(f2, BipartiteIncidence(2, 0));
    CHECK(z2.get(0, 1) == 1.0);
    CHECK(z2.get(1, 0) == 1.0);
}

TEST_CASE("filter_popular zeroes celebrity columns and is idempotent") {
    // star: 6 users all mention external e0; threshold 5 -> zeroed
    WeightedAdjacency m(7);
    BipartiteIncidence x(7, 1);
    for (int i = 0; i < 6; ++i) x.set(i, 0);
    auto [mf, xf] = filter_popular(m, x, 5);
    for (int i = 0; i < 7; ++i) CHECK_FALSE(xf.get(i, 0));

    // internal celebrity: column zeroed, its outgoing row untouched
    WeightedAdjacency m2(12);
    for (int i = 0; i < 10; ++i)
        if (i != 3) m2.add(i, 3, 2.0);
    m2.add(3, 0, 1.0);
    auto [m2f, x2f] = filter_popular(m2, BipartiteIncidence(12, 0), 5);
    for (int i = 0; i < 12; ++i) CHECK(m2f.get(i, 3) == 0.0);
    CHECK(m2f.get(3, 0) == 1.0);

    // idempotence
    auto [m3, x3] = filter_popular(m2f, x2f, 5);
    CHECK(dense_of(m3) == dense_of(m2f));
    CHECK(dense_of(x3) == dense_of(x2f));

    // huge threshold is the identity
    auto [m4, x4] = filter_popular(m2, BipartiteIncidence(12, 0), 1000000);
    CHECK(dense_of(m4) == dense_of(m2));

    CHECK_THROWS(filter_popular(m2, BipartiteIncidence(12, 0), 0));

    // boundary: exactly threshold in-linkers survive
    WeightedAdjacency m5(6);
    for (int i = 0; i < 5; ++i) m5.add(i, 5, 1.0);
    auto [m5f, x5f] = filter_popular(m5, BipartiteIncidence(6, 0), 5);
    CHECK(m5f.get(0, 5) == 1.0);
}

TEST_CASE("adding a mention never decreases Y") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + static_cast<int>(rng.uniform_int(10));
        auto [m, x] = random_fixture(rng, n, 5, false);
        MatrixXd base = dense_of(extend_mention_network(m, x));
        int i = static_cast<int>(rng.uniform_int(n));
        int j = (i + 1 + static_cast<int>(rng.uniform_int(n - 1))) % n;
        m.add(i, j, 1.0);
        MatrixXd aug = dense_of(extend_mention_network(m, x));
        CHECK((aug - base).minCoeff() >= 0.0);
    }
}

TEST_CASE("internal hub star keeps k edges, not a clique") {
    int k = 8;
    WeightedAdjacency m(k + 1);
    for (int i = 1; i <= k; ++i) m.add(i, 0, 1.0);
    auto y = extend_mention_network(m, BipartiteIncidence(k + 1, 0));
    size_t undirected_edges = y.nnz() / 2;
    CHECK(undirected_edges == static_cast<size_t>(k));
}

TEST_CASE("multiplex assembly and node-count mismatch") {
    WeightedAdjacency a(5), b(5), c(4);
    auto g1 = assemble_multiplex({{"mention", a}});
    CHECK(g1.layers.size() == 1);
    auto g2 = assemble_multiplex({{"mention", a}, {"follower", b}});
    CHECK(g2.layers.size() == 2);
    CHECK_THROWS(assemble_multiplex({{"mention", a}, {"follower", c}}));
}

TEST_CASE("multiplex serialization round trip is lossless") {
    Rng rng(31);
    auto [m, x] = random_fixture(rng, 12, 6, false);
    auto y = extend_mention_network(m, x);
    auto [f, xf] = random_fixture(rng, 12, 6, true);
    auto z = extend_follower_network(f, xf);
    auto g = assemble_multiplex({{"mention", y}, {"follower", z}});

    NodeIndex idx;
    std::vector<UserRecord> users(12);
    for (int i = 0; i < 12; ++i) idx.intern("user" + std::to_string(i));

    testutil::TempDir dir("multiplex");
    save_multiplex(g, idx, dir.file("edges.tsv"), dir.file("nodes.tsv"), "test");
    auto [g2, names] = load_multiplex(dir.file("edges.tsv"), dir.file("nodes.tsv"));
    REQUIRE(g2.layers.size() == g.layers.size());
    for (size_t l = 0; l < g.layers.size(); ++l) {
        CHECK(g2.layers[l].first == g.layers[l].first);
        CHECK(dense_of(g2.layers[l].second) == dense_of(g.layers[l].second));
    }
    REQUIRE(names.size() == 12);
    CHECK(names[3] == "user3");
}
