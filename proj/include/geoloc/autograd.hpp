#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace geoloc::ag {

using Mat = Eigen::MatrixXd;

struct Tensor;
using Var = std::shared_ptr<Tensor>;

/// Dense rank-2 tensor node. Vectors are 1xN, scalars 1x1. Nodes form the
/// backward DAG through `parents`; creation order is not relied upon.
struct Tensor {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    std::string name;
    std::vector<Var> parents;
    std::function<void(Tensor&)> backward_fn;  // accumulates into parents' grads
    bool backward_done = false;

    int rows() const { return static_cast<int>(val.rows()); }
    int cols() const { return static_cast<int>(val.cols()); }
    double scalar() const { return val(0, 0); }
    void ensure_grad() {
        if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    }
};

Var constant(Mat m);
Var param(std::string name, Mat m);

// forward ops
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);          // same shape, or b a 1xC row bias
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);          // elementwise
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var softmax_rows(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& parts); // each 1xC
Var mean_rows(const Var& a);                   // 1xC column means
Var sum(const Var& a);                         // 1x1
Var gather_rows(const Var& table, const std::vector<int>& ids);

/// Fixed (non-differentiable) sparse matrix in triplet form.
struct SparseMat {
    int rows = 0, cols = 0;
    std::vector<std::tuple<int, int, double>> triplets;
};
Var sparse_matmul(const SparseMat& s, const Var& h);  // s * h

/// -mean_i log(max(p[i, target_i], 1e-12)); probs must be row distributions.
Var cross_entropy(const Var& probs, const std::vector<int>& targets);

/// Reverse-mode pass from a scalar root. A second call on the same root
/// without rebuilding the graph throws.
void backward(const Var& loss);

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(const std::vector<Var>& params);
    void reset() { m_.clear(); v_.clear(); t_ = 0; }

private:
    std::vector<Mat> m_, v_;
    long t_ = 0;
};

void zero_grad(const std::vector<Var>& params);

/// Central finite differences against analytic grads; returns the max
/// relative error over all parameter entries.
double grad_check(const std::function<Var()>& loss_fn, const std::vector<Var>& params,
                  double step = 1e-5);

/// Flat binary checkpoint (name, shape, raw doubles); bit-exact round trip.
void save_checkpoint(const std::string& path, const std::vector<Var>& params,
                     uint64_t config_hash = 0);
void load_checkpoint(const std::string& path, const std::vector<Var>& params,
                     uint64_t* config_hash = nullptr);

}  // namespace geoloc::ag
