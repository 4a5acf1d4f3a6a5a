#include <doctest.h>

#include <cmath>

#include "geoloc/autograd.hpp"
#include "geoloc/rng.hpp"
#include "helpers.hpp"

using namespace geoloc;
using ag::Mat;
using ag::Var;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-1, 1);
    return m;
}

}  // namespace

TEST_CASE("forward op basics") {
    Mat z = Mat::Zero(1, 3);
    CHECK(ag::softmax_rows(ag::constant(z))->val(0, 1) == doctest::Approx(1.0 / 3));

    Mat v(1, 2);
    v << -1, 2;
    Mat r = ag::relu(ag::constant(v))->val;
    CHECK(r(0, 0) == 0.0);
    CHECK(r(0, 1) == 2.0);

    Rng rng(1);
    Mat x = random_mat(3, 4, rng);
    Mat id = Mat::Identity(3, 3);
    CHECK(ag::matmul(ag::constant(id), ag::constant(x))->val == x);
}

TEST_CASE("cross entropy values") {
    Mat perfect(1, 3);
    perfect << 0, 1, 0;
    CHECK(ag::cross_entropy(ag::constant(perfect), {1})->scalar() ==
          doctest::Approx(0.0).epsilon(1e-12));

    Mat uniform = Mat::Constant(1, 4, 0.25);
    CHECK(ag::cross_entropy(ag::constant(uniform), {2})->scalar() ==
          doctest::Approx(std::log(4.0)));

    Mat batch(2, 2);
    batch << 1, 0, 0.5, 0.5;
    CHECK(ag::cross_entropy(ag::constant(batch), {0, 1})->scalar() ==
          doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("backward: sum of squares and error cases") {
    Mat x0(1, 2);
    x0 << 1, 2;
    Var x = ag::param("x", x0);
    Var loss = ag::sum(ag::mul(x, x));
    ag::backward(loss);
    CHECK(x->grad(0, 0) == 2.0);
    CHECK(x->grad(0, 1) == 4.0);
    CHECK_THROWS(ag::backward(loss));  // second pass on the same graph

    Var nonscalar = ag::param("m", Mat::Zero(2, 2));
    CHECK_THROWS(ag::backward(nonscalar));

    // constant-only graph: no gradients requested anywhere
    Var c = ag::sum(ag::constant(Mat::Ones(2, 2)));
    ag::backward(c);
}

TEST_CASE("softmax + cross entropy gradient is (p - onehot) / batch") {
    Rng rng(3);
    Var z = ag::param("z", random_mat(4, 3, rng));
    std::vector<int> targets = {0, 2, 1, 2};
    Var probs = ag::softmax_rows(z);
    Mat p = probs->val;
    ag::backward(ag::cross_entropy(probs, targets));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            double want = (p(i, j) - (targets[i] == j ? 1.0 : 0.0)) / 4.0;
            CHECK(z->grad(i, j) == doctest::Approx(want).epsilon(1e-9));
        }
}

TEST_CASE("grad_check across ops") {
    Rng rng(7);

    // linear map: exact for central differences
    Var w = ag::param("w", random_mat(3, 2, rng));
    Mat x = random_mat(4, 3, rng);
    auto linear = [&] { return ag::sum(ag::matmul(ag::constant(x), w)); };
    CHECK(ag::grad_check(linear, {w}) < 1e-8);

    // 3-layer MLP with softmax head
    Var w1 = ag::param("w1", random_mat(5, 8, rng));
    Var b1 = ag::param("b1", random_mat(1, 8, rng));
    Var w2 = ag::param("w2", random_mat(8, 6, rng));
    Var b2 = ag::param("b2", random_mat(1, 6, rng));
    Var w3 = ag::param("w3", random_mat(6, 3, rng));
    Mat input = random_mat(7, 5, rng);
    std::vector<int> y = {0, 1, 2, 0, 1, 2, 0};
    auto mlp = [&] {
        Var h1 = ag::relu(ag::add(ag::matmul(ag::constant(input), w1), b1));
        Var h2 = ag::relu(ag::add(ag::matmul(h1, w2), b2));
        return ag::cross_entropy(ag::softmax_rows(ag::matmul(h2, w3)), y);
    };
    CHECK(ag::grad_check(mlp, {w1, b1, w2, b2, w3}) < 1e-5);

    // remaining ops: transpose, scale, sub, concat, stack, mean, gather, sparse
    Var a = ag::param("a", random_mat(3, 3, rng));
    Var b = ag::param("b", random_mat(3, 3, rng));
    ag::SparseMat s;
    s.rows = s.cols = 3;
    s.triplets = {{0, 1, 2.0}, {1, 2, -1.5}, {2, 0, 0.5}, {2, 2, 1.0}};
    auto mixed = [&] {
        Var t = ag::sub(ag::transpose(a), ag::scale(b, 0.7));
        Var sp = ag::sparse_matmul(s, t);
        Var cat = ag::concat_cols({sp, t});
        Var g = ag::gather_rows(cat, {2, 0, 0});
        Var st = ag::stack_rows({ag::mean_rows(g), ag::mean_rows(cat)});
        return ag::sum(ag::mul(st, st));
    };
    CHECK(ag::grad_check(mixed, {a, b}) < 1e-5);
}

TEST_CASE("sparse_matmul matches dense multiply") {
    Rng rng(11);
    ag::SparseMat s;
    s.rows = 4;
    s.cols = 3;
    Mat dense = Mat::Zero(4, 3);
    for (int k = 0; k < 6; ++k) {
        int i = static_cast<int>(rng.uniform_int(4));
        int j = static_cast<int>(rng.uniform_int(3));
        double w = rng.uniform(-2, 2);
        s.triplets.emplace_back(i, j, w);
        dense(i, j) += w;
    }
    Mat h = random_mat(3, 5, rng);
    Mat got = ag::sparse_matmul(s, ag::constant(h))->val;
    CHECK((got - dense * h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-finite values are rejected") {
    Mat big = Mat::Constant(1, 2, 1e308);
    CHECK_THROWS(ag::mul(ag::constant(big), ag::constant(big)));
}

TEST_CASE("adam single step matches hand computation") {
    Var x = ag::param("x", Mat::Constant(1, 1, 10.0));
    Var loss = ag::sum(ag::mul(x, x));  // grad 20
    ag::backward(loss);
    ag::Adam adam;
    adam.lr = 0.1;
    adam.step({x});
    // bias-corrected first step moves by exactly lr (up to eps)
    double m_hat = 20.0, v_hat = 400.0;
    double want = 10.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(x->val(0, 0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(13);
    Var a = ag::param("a", random_mat(3, 4, rng));
    Var b = ag::param("b", random_mat(1, 7, rng));
    Mat va = a->val, vb = b->val;

    testutil::TempDir dir("ckpt");
    ag::save_checkpoint(dir.file("m.ckpt"), {a, b}, 0xdeadbeefULL);

    a->val.setZero();
    b->val.setZero();
    uint64_t hash = 0;
    ag::load_checkpoint(dir.file("m.ckpt"), {a, b}, &hash);
    CHECK(hash == 0xdeadbeefULL);
    CHECK(a->val == va);
    CHECK(b->val == vb);

    // shape mismatch rejected
    Var wrong = ag::param("a", Mat::Zero(2, 2));
    CHECK_THROWS(ag::load_checkpoint(dir.file("m.ckpt"), {wrong, b}));
}
