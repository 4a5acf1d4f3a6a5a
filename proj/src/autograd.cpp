#include "geoloc/autograd.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace geoloc::ag {

namespace {

void check_finite(const Mat& m, const char* op) {
    if (!m.allFinite())
        throw std::runtime_error(std::string("non-finite values after op ") + op);
}

Var make_node(Mat val, std::vector<Var> parents, std::function<void(Tensor&)> fn,
              const char* op) {
    check_finite(val, op);
    auto t = std::make_shared<Tensor>();
    t->val = std::move(val);
    for (const auto& p : parents)
        if (p->requires_grad) t->requires_grad = true;
    t->parents = std::move(parents);
    if (t->requires_grad) t->backward_fn = std::move(fn);
    return t;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->rows() != b->rows() || a->cols() != b->cols())
        throw std::runtime_error(std::string(op) + ": shape mismatch (" +
                                 std::to_string(a->rows()) + "x" + std::to_string(a->cols()) +
                                 " vs " + std::to_string(b->rows()) + "x" +
                                 std::to_string(b->cols()) + ")");
}

}  // namespace

Var constant(Mat m) {
    auto t = std::make_shared<Tensor>();
    t->val = std::move(m);
    return t;
}

Var param(std::string name, Mat m) {
    auto t = std::make_shared<Tensor>();
    t->val = std::move(m);
    t->requires_grad = true;
    t->name = std::move(name);
    t->ensure_grad();
    return t;
}

Var matmul(const Var& a, const Var& b) {
    if (a->cols() != b->rows())
        throw std::runtime_error("matmul: inner dimensions disagree (" +
                                 std::to_string(a->cols()) + " vs " +
                                 std::to_string(b->rows()) + ")");
    return make_node(a->val * b->val, {a, b},
                     [a, b](Tensor& t) {
                         if (a->requires_grad) {
                             a->ensure_grad();
                             a->grad.noalias() += t.grad * b->val.transpose();
                         }
                         if (b->requires_grad) {
                             b->ensure_grad();
                             b->grad.noalias() += a->val.transpose() * t.grad;
                         }
                     },
                     "matmul");
}

Var transpose(const Var& a) {
    return make_node(a->val.transpose(), {a},
                     [a](Tensor& t) {
                         a->ensure_grad();
                         a->grad += t.grad.transpose();
                     },
                     "transpose");
}

Var add(const Var& a, const Var& b) {
    if (b->rows() == 1 && a->rows() > 1 && a->cols() == b->cols()) {
        // row-broadcast bias
        return make_node(a->val.rowwise() + b->val.row(0), {a, b},
                         [a, b](Tensor& t) {
                             if (a->requires_grad) {
                                 a->ensure_grad();
                                 a->grad += t.grad;
                             }
                             if (b->requires_grad) {
                                 b->ensure_grad();
                                 b->grad.row(0) += t.grad.colwise().sum();
                             }
                         },
                         "add");
    }
    require_same_shape(a, b, "add");
    return make_node(a->val + b->val, {a, b},
                     [a, b](Tensor& t) {
                         if (a->requires_grad) {
                             a->ensure_grad();
                             a->grad += t.grad;
                         }
                         if (b->requires_grad) {
                             b->ensure_grad();
                             b->grad += t.grad;
                         }
                     },
                     "add");
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    return make_node(a->val.cwiseProduct(b->val), {a, b},
                     [a, b](Tensor& t) {
                         if (a->requires_grad) {
                             a->ensure_grad();
                             a->grad += t.grad.cwiseProduct(b->val);
                         }
                         if (b->requires_grad) {
                             b->ensure_grad();
                             b->grad += t.grad.cwiseProduct(a->val);
                         }
                     },
                     "mul");
}

Var scale(const Var& a, double s) {
    return make_node(a->val * s, {a},
                     [a, s](Tensor& t) {
                         a->ensure_grad();
                         a->grad += t.grad * s;
                     },
                     "scale");
}

Var relu(const Var& a) {
    return make_node(a->val.cwiseMax(0.0), {a},
                     [a](Tensor& t) {
                         a->ensure_grad();
                         a->grad += t.grad.cwiseProduct(
                             (a->val.array() > 0.0).cast<double>().matrix());
                     },
                     "relu");
}

Var softmax_rows(const Var& a) {
    Mat out(a->rows(), a->cols());
    for (int i = 0; i < a->rows(); ++i) {
        Eigen::RowVectorXd row = a->val.row(i);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp();
        out.row(i) = e / e.sum();
    }
    auto node = make_node(std::move(out), {a},
                          [a](Tensor& t) {
                              a->ensure_grad();
                              for (int i = 0; i < t.rows(); ++i) {
                                  Eigen::RowVectorXd p = t.val.row(i);
                                  Eigen::RowVectorXd g = t.grad.row(i);
                                  double dot = p.dot(g);
                                  a->grad.row(i) += (p.array() * (g.array() - dot)).matrix();
                              }
                          },
                          "softmax");
    return node;
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_cols: no parts");
    int rows = parts[0]->rows();
    int cols = 0;
    for (const auto& p : parts) {
        if (p->rows() != rows) throw std::runtime_error("concat_cols: row mismatch");
        cols += p->cols();
    }
    Mat out(rows, cols);
    int off = 0;
    for (const auto& p : parts) {
        out.middleCols(off, p->cols()) = p->val;
        off += p->cols();
    }
    return make_node(std::move(out), parts,
                     [parts](Tensor& t) {
                         int off = 0;
                         for (const auto& p : parts) {
                             if (p->requires_grad) {
                                 p->ensure_grad();
                                 p->grad += t.grad.middleCols(off, p->cols());
                             }
                             off += p->cols();
                         }
                     },
                     "concat_cols");
}

Var stack_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::runtime_error("stack_rows: no parts");
    int cols = parts[0]->cols();
    int rows = 0;
    for (const auto& p : parts) {
        if (p->cols() != cols || p->rows() != 1)
            throw std::runtime_error("stack_rows: parts must be 1xC");
        rows += 1;
    }
    Mat out(rows, cols);
    for (int i = 0; i < rows; ++i) out.row(i) = parts[i]->val.row(0);
    return make_node(std::move(out), parts,
                     [parts](Tensor& t) {
                         for (size_t i = 0; i < parts.size(); ++i) {
                             if (parts[i]->requires_grad) {
                                 parts[i]->ensure_grad();
                                 parts[i]->grad.row(0) += t.grad.row(static_cast<int>(i));
                             }
                         }
                     },
                     "stack_rows");
}

Var mean_rows(const Var& a) {
    double inv = 1.0 / a->rows();
    return make_node(a->val.colwise().mean(), {a},
                     [a, inv](Tensor& t) {
                         a->ensure_grad();
                         a->grad += (t.grad.row(0) * inv).replicate(a->rows(), 1);
                     },
                     "mean_rows");
}

Var sum(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a->val.sum();
    return make_node(std::move(out), {a},
                     [a](Tensor& t) {
                         a->ensure_grad();
                         a->grad.array() += t.grad(0, 0);
                     },
                     "sum");
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    Mat out(static_cast<int>(ids.size()), table->cols());
    for (size_t i = 0; i < ids.size(); ++i) out.row(static_cast<int>(i)) = table->val.row(ids[i]);
    return make_node(std::move(out), {table},
                     [table, ids](Tensor& t) {
                         table->ensure_grad();
                         for (size_t i = 0; i < ids.size(); ++i)
                             table->grad.row(ids[i]) += t.grad.row(static_cast<int>(i));
                     },
                     "gather_rows");
}

Var sparse_matmul(const SparseMat& s, const Var& h) {
    if (s.cols != h->rows())
        throw std::runtime_error("sparse_matmul: inner dimensions disagree");
    auto sp = std::make_shared<SparseMat>(s);
    Mat out = Mat::Zero(s.rows, h->cols());
    for (const auto& [i, j, w] : sp->triplets) out.row(i) += w * h->val.row(j);
    return make_node(std::move(out), {h},
                     [sp, h](Tensor& t) {
                         h->ensure_grad();
                         for (const auto& [i, j, w] : sp->triplets)
                             h->grad.row(j) += w * t.grad.row(i);
                     },
                     "sparse_matmul");
}

Var cross_entropy(const Var& probs, const std::vector<int>& targets) {
    if (static_cast<int>(targets.size()) != probs->rows())
        throw std::runtime_error("cross_entropy: target count != batch rows");
    constexpr double kEps = 1e-12;
    int n = probs->rows();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (targets[i] < 0 || targets[i] >= probs->cols())
            throw std::runtime_error("cross_entropy: target out of range");
        loss -= std::log(std::max(probs->val(i, targets[i]), kEps));
    }
    Mat out(1, 1);
    out(0, 0) = loss / n;
    return make_node(std::move(out), {probs},
                     [probs, targets, n](Tensor& t) {
                         probs->ensure_grad();
                         double g = t.grad(0, 0) / n;
                         for (int i = 0; i < n; ++i) {
                             double p = std::max(probs->val(i, targets[i]), 1e-12);
                             probs->grad(i, targets[i]) -= g / p;
                         }
                     },
                     "cross_entropy");
}

void backward(const Var& loss) {
    if (loss->rows() != 1 || loss->cols() != 1)
        throw std::runtime_error("backward: root must be scalar");
    if (loss->backward_done)
        throw std::runtime_error("backward: repeated call without rebuilding the graph");
    loss->backward_done = true;

    // iterative post-order topological sort
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, size_t>> stack{{loss.get(), 0}};
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            Tensor* p = node->parents[child++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

void zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params) p->grad.setZero();
}

void Adam::step(const std::vector<Var>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
            v_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        p.ensure_grad();
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * p.grad;
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
        Mat mhat = m_[i] / bc1;
        Mat vhat = v_[i] / bc2;
        p.val.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    }
}

double grad_check(const std::function<Var()>& loss_fn, const std::vector<Var>& params,
                  double step) {
    zero_grad(params);
    backward(loss_fn());
    double max_rel = 0.0;
    for (const auto& p : params) {
        for (int i = 0; i < p->rows(); ++i) {
            for (int j = 0; j < p->cols(); ++j) {
                double orig = p->val(i, j);
                p->val(i, j) = orig + step;
                double up = loss_fn()->scalar();
                p->val(i, j) = orig - step;
                double down = loss_fn()->scalar();
                p->val(i, j) = orig;
                double fd = (up - down) / (2.0 * step);
                double an = p->grad(i, j);
                double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
                max_rel = std::max(max_rel, std::abs(fd - an) / denom);
            }
        }
    }
    return max_rel;
}

void save_checkpoint(const std::string& path, const std::vector<Var>& params,
                     uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const char magic[8] = {'G', 'L', 'C', 'K', 'P', 'T', '0', '1'};
    out.write(magic, 8);
    out.write(reinterpret_cast<const char*>(&config_hash), 8);
    uint64_t count = params.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto& p : params) {
        uint64_t nlen = p->name.size();
        out.write(reinterpret_cast<const char*>(&nlen), 8);
        out.write(p->name.data(), static_cast<std::streamsize>(nlen));
        uint64_t r = p->val.rows(), c = p->val.cols();
        out.write(reinterpret_cast<const char*>(&r), 8);
        out.write(reinterpret_cast<const char*>(&c), 8);
        for (int i = 0; i < p->rows(); ++i)
            for (int j = 0; j < p->cols(); ++j) {
                double v = p->val(i, j);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
    }
}

void load_checkpoint(const std::string& path, const std::vector<Var>& params,
                     uint64_t* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != "GLCKPT01")
        throw std::runtime_error("bad checkpoint magic in " + path);
    uint64_t hash = 0, count = 0;
    in.read(reinterpret_cast<char*>(&hash), 8);
    if (config_hash) *config_hash = hash;
    in.read(reinterpret_cast<char*>(&count), 8);
    if (count != params.size())
        throw std::runtime_error("checkpoint parameter count mismatch");
    for (const auto& p : params) {
        uint64_t nlen = 0;
        in.read(reinterpret_cast<char*>(&nlen), 8);
        std::string name(nlen, '\0');
        in.read(name.data(), static_cast<std::streamsize>(nlen));
        if (name != p->name)
            throw std::runtime_error("checkpoint parameter order mismatch: " + name +
                                     " vs " + p->name);
        uint64_t r = 0, c = 0;
        in.read(reinterpret_cast<char*>(&r), 8);
        in.read(reinterpret_cast<char*>(&c), 8);
        if (static_cast<int>(r) != p->rows() || static_cast<int>(c) != p->cols())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        for (int i = 0; i < p->rows(); ++i)
            for (int j = 0; j < p->cols(); ++j) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                p->val(i, j) = v;
            }
    }
}

}  // namespace geoloc::ag
