#include "geoloc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoloc {

namespace {

Mat glorot(int rows, int cols, Rng& rng) {
    double r = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-r, r);
    return m;
}

double epoch_loss_guard(double loss) {
    if (!std::isfinite(loss)) throw TrainingDivergence("training loss diverged (NaN/Inf)");
    return loss;
}

/// Shared early-stopping bookkeeping.
struct EarlyStop {
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    bool should_stop(double val_loss) {
        if (patience <= 0) return false;
        if (val_loss < best - 1e-9) {
            best = val_loss;
            since_best = 0;
        } else if (++since_best >= patience) {
            return true;
        }
        return false;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Transformer

Transformer::Transformer(TransformerConfig cfg, const EmbeddingTable* pretrained,
                         uint64_t seed)
    : cfg_(cfg) {
    if (cfg_.d % cfg_.heads != 0)
        throw std::invalid_argument("transformer: d must be divisible by head count");
    if (cfg_.num_labels < 2 || cfg_.vocab_size < 2)
        throw std::invalid_argument("transformer: bad label/vocab config");
    Rng rng(seed);
    int dk = cfg_.d / cfg_.heads;

    Mat emb;
    if (pretrained) {
        if (pretrained->dim != cfg_.d ||
            static_cast<int>(pretrained->rows.size()) != cfg_.vocab_size)
            throw std::invalid_argument("transformer: embedding table shape mismatch");
        emb = Mat(cfg_.vocab_size, cfg_.d);
        for (int i = 0; i < cfg_.vocab_size; ++i)
            for (int j = 0; j < cfg_.d; ++j) emb(i, j) = pretrained->rows[i][j];
    } else {
        emb = glorot(cfg_.vocab_size, cfg_.d, rng);
        emb.row(0).setZero();  // padding
    }
    emb_ = ag::param("emb", std::move(emb));
    qctx_ = ag::param("qctx", glorot(1, cfg_.d, rng));
    for (int h = 0; h < cfg_.heads; ++h) {
        wq_.push_back(ag::param("wq" + std::to_string(h), glorot(cfg_.d, dk, rng)));
        wk_.push_back(ag::param("wk" + std::to_string(h), glorot(cfg_.d, dk, rng)));
        wv_.push_back(ag::param("wv" + std::to_string(h), glorot(cfg_.d, dk, rng)));
    }
    wo_ = ag::param("wo", glorot(cfg_.d, cfg_.d, rng));
    w1_ = ag::param("w1", glorot(cfg_.d, cfg_.ff_hidden, rng));
    b1_ = ag::param("b1", Mat::Zero(1, cfg_.ff_hidden));
    w2_ = ag::param("w2", glorot(cfg_.ff_hidden, cfg_.num_labels, rng));
    b2_ = ag::param("b2", Mat::Zero(1, cfg_.num_labels));

    // sinusoidal positional encoding
    posenc_ = Mat(cfg_.max_len, cfg_.d);
    for (int pos = 0; pos < cfg_.max_len; ++pos) {
        for (int i = 0; i < cfg_.d; ++i) {
            double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / cfg_.d);
            posenc_(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
}

std::vector<ag::Var> Transformer::params() const {
    std::vector<ag::Var> ps{emb_, qctx_};
    for (int h = 0; h < cfg_.heads; ++h) {
        ps.push_back(wq_[h]);
        ps.push_back(wk_[h]);
        ps.push_back(wv_[h]);
    }
    ps.push_back(wo_);
    ps.push_back(w1_);
    ps.push_back(b1_);
    ps.push_back(w2_);
    ps.push_back(b2_);
    return ps;
}

ag::Var Transformer::forward(const std::vector<int>& ids) const {
    if (ids.empty()) throw std::invalid_argument("transformer forward: empty sequence");
    std::vector<int> trunc(ids.begin(),
                           ids.begin() + std::min<size_t>(ids.size(), cfg_.max_len));
    int seq = static_cast<int>(trunc.size());
    int dk = cfg_.d / cfg_.heads;
    ag::Var h = ag::add(ag::gather_rows(emb_, trunc), ag::constant(posenc_.topRows(seq)));
    std::vector<ag::Var> heads;
    for (int i = 0; i < cfg_.heads; ++i) {
        ag::Var query = ag::matmul(qctx_, wq_[i]);            // 1 x dk
        ag::Var keys = ag::matmul(h, wk_[i]);                  // seq x dk
        ag::Var values = ag::matmul(h, wv_[i]);                // seq x dk
        ag::Var scores = ag::scale(ag::matmul(query, ag::transpose(keys)),
                                   1.0 / std::sqrt(static_cast<double>(dk)));
        heads.push_back(ag::matmul(ag::softmax_rows(scores), values));  // 1 x dk
    }
    ag::Var pooled = ag::matmul(ag::concat_cols(heads), wo_);  // 1 x d
    ag::Var hidden = ag::relu(ag::add(ag::matmul(pooled, w1_), b1_));
    return ag::softmax_rows(ag::add(ag::matmul(hidden, w2_), b2_));
}

Mat Transformer::predict(const std::vector<std::vector<int>>& seqs,
                         const std::vector<double>& prior) const {
    Mat out(static_cast<int>(seqs.size()), cfg_.num_labels);
    for (size_t u = 0; u < seqs.size(); ++u) {
        if (seqs[u].empty()) {
            for (int l = 0; l < cfg_.num_labels; ++l) out(static_cast<int>(u), l) = prior[l];
        } else {
            out.row(static_cast<int>(u)) = forward(seqs[u])->val.row(0);
        }
    }
    return out;
}

FitResult Transformer::fit(const std::vector<std::vector<int>>& seqs,
                           const std::vector<int>& labels,
                           const std::vector<std::vector<int>>& val_seqs,
                           const std::vector<int>& val_labels, const FitOptions& opts) {
    std::vector<size_t> usable;
    for (size_t i = 0; i < seqs.size(); ++i)
        if (!seqs[i].empty()) usable.push_back(i);
    if (usable.empty()) throw std::invalid_argument("transformer fit: all sequences empty");

    auto ps = params();
    ag::Adam adam;
    adam.lr = opts.lr;
    Rng rng(opts.seed);
    EarlyStop stop{opts.patience};
    FitResult res;
    int batch = opts.batch > 0 ? opts.batch : static_cast<int>(usable.size());

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(usable);
        double total = 0.0;
        size_t nb = 0;
        for (size_t off = 0; off < usable.size(); off += batch) {
            size_t end = std::min(usable.size(), off + batch);
            std::vector<ag::Var> rows;
            std::vector<int> targets;
            for (size_t k = off; k < end; ++k) {
                rows.push_back(forward(seqs[usable[k]]));
                targets.push_back(labels[usable[k]]);
            }
            ag::Var loss = ag::cross_entropy(ag::stack_rows(rows), targets);
            total += epoch_loss_guard(loss->scalar()) * static_cast<double>(targets.size());
            ag::zero_grad(ps);
            ag::backward(loss);
            adam.step(ps);
            ++nb;
        }
        res.train_loss.push_back(total / static_cast<double>(usable.size()));
        if (!val_seqs.empty()) {
            std::vector<ag::Var> rows;
            std::vector<int> targets;
            for (size_t k = 0; k < val_seqs.size(); ++k) {
                if (val_seqs[k].empty()) continue;
                rows.push_back(forward(val_seqs[k]));
                targets.push_back(val_labels[k]);
            }
            double vl = rows.empty()
                            ? 0.0
                            : ag::cross_entropy(ag::stack_rows(rows), targets)->scalar();
            res.val_loss.push_back(epoch_loss_guard(vl));
            if (stop.should_stop(vl)) break;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// RGCN

RGCN::RGCN(const MultiplexGraph& g, RGCNConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), n_(g.n()) {
    if (cfg_.widths.size() < 2) throw std::invalid_argument("rgcn: need >= 2 widths");
    Rng rng(seed);
    for (const auto& [name, adj] : g.layers) {
        ag::SparseMat s;
        s.rows = s.cols = n_;
        for (int i = 0; i < n_; ++i) {
            double c = adj.weighted_degree(i);  // c_{i,r}
            if (c <= 0.0) continue;
            for (const auto& [j, w] : adj.neighbors(i))
                if (w != 0.0) s.triplets.emplace_back(i, j, w / c);
        }
        norm_adj_.push_back(std::move(s));
    }
    size_t n_layers = cfg_.widths.size() - 1;
    for (size_t l = 0; l < n_layers; ++l) {
        int in = cfg_.widths[l], out = cfg_.widths[l + 1];
        std::vector<ag::Var> per_rel;
        for (size_t r = 0; r < norm_adj_.size(); ++r)
            per_rel.push_back(ag::param("rgcn_w_l" + std::to_string(l) + "_r" +
                                            std::to_string(r),
                                        glorot(in, out, rng)));
        w_rel_.push_back(std::move(per_rel));
        w_self_.push_back(ag::param("rgcn_w0_l" + std::to_string(l), glorot(in, out, rng)));
        bias_.push_back(ag::param("rgcn_b_l" + std::to_string(l), Mat::Zero(1, out)));
    }
}

std::vector<ag::Var> RGCN::params() const {
    std::vector<ag::Var> ps;
    for (size_t l = 0; l < w_self_.size(); ++l) {
        for (const auto& w : w_rel_[l]) ps.push_back(w);
        ps.push_back(w_self_[l]);
        ps.push_back(bias_[l]);
    }
    return ps;
}

ag::Var RGCN::forward(const ag::Var& h0) const {
    ag::Var h = h0;
    size_t n_layers = w_self_.size();
    for (size_t l = 0; l < n_layers; ++l) {
        ag::Var acc = ag::add(ag::matmul(h, w_self_[l]), bias_[l]);
        for (size_t r = 0; r < norm_adj_.size(); ++r)
            acc = ag::add(acc, ag::matmul(ag::sparse_matmul(norm_adj_[r], h), w_rel_[l][r]));
        h = (l + 1 < n_layers) ? ag::relu(acc) : ag::softmax_rows(acc);
    }
    return h;
}

Mat RGCN::predict(const Mat& h0) const { return forward(ag::constant(h0))->val; }

namespace {

/// Full-batch training shared by RGCN and GraphSAGE.
template <typename ForwardFn>
FitResult fit_graph_model(ForwardFn&& fwd, const std::vector<ag::Var>& ps,
                          const std::vector<int>& train_idx,
                          const std::vector<int>& train_labels,
                          const std::vector<int>& val_idx,
                          const std::vector<int>& val_labels, const FitOptions& opts) {
    ag::Adam adam;
    adam.lr = opts.lr;
    EarlyStop stop{opts.patience};
    FitResult res;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        ag::Var probs = fwd(epoch);
        ag::Var loss = ag::cross_entropy(ag::gather_rows(probs, train_idx), train_labels);
        res.train_loss.push_back(epoch_loss_guard(loss->scalar()));
        ag::zero_grad(ps);
        ag::backward(loss);
        adam.step(ps);
        if (!val_idx.empty()) {
            ag::Var vp = fwd(-1);
            double vl =
                ag::cross_entropy(ag::gather_rows(vp, val_idx), val_labels)->scalar();
            res.val_loss.push_back(epoch_loss_guard(vl));
            if (stop.should_stop(vl)) break;
        }
    }
    return res;
}

}  // namespace

FitResult RGCN::fit(const Mat& h0, const std::vector<int>& train_idx,
                    const std::vector<int>& train_labels, const std::vector<int>& val_idx,
                    const std::vector<int>& val_labels, const FitOptions& opts) {
    ag::Var h0c = ag::constant(h0);
    return fit_graph_model([&](int) { return forward(h0c); }, params(), train_idx,
                           train_labels, val_idx, val_labels, opts);
}

// ---------------------------------------------------------------------------
// GraphSAGE

GraphSAGE::GraphSAGE(const WeightedAdjacency& g, SAGEConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), graph_(&g) {
    if (cfg_.widths.size() < 2) throw std::invalid_argument("sage: need >= 2 widths");
    if (cfg_.sample_sizes.size() != cfg_.widths.size() - 1)
        throw std::invalid_argument("sage: one sample size per layer required");
    Rng rng(seed);
    for (size_t l = 0; l + 1 < cfg_.widths.size(); ++l)
        w_.push_back(ag::param("sage_w_l" + std::to_string(l),
                               glorot(2 * cfg_.widths[l], cfg_.widths[l + 1], rng)));
}

std::vector<ag::Var> GraphSAGE::params() const { return w_; }

ag::SparseMat GraphSAGE::mean_matrix(Rng* rng, int sample_size) const {
    ag::SparseMat s;
    s.rows = s.cols = graph_->n();
    for (int i = 0; i < graph_->n(); ++i) {
        const auto& nbrs = graph_->neighbors(i);
        std::vector<int> chosen;
        if (rng == nullptr || sample_size <= 0 ||
            static_cast<int>(nbrs.size()) <= sample_size) {
            for (const auto& [j, w] : nbrs)
                if (w != 0.0) chosen.push_back(j);
        } else {
            // sample without replacement, weight-proportional would also be
            // defensible; uniform matches the reference aggregator
            std::vector<int> pool;
            for (const auto& [j, w] : nbrs)
                if (w != 0.0) pool.push_back(j);
            for (int k = 0; k < sample_size; ++k) {
                size_t pick = rng->uniform_int(pool.size() - k);
                std::swap(pool[pick], pool[pool.size() - 1 - k]);
                chosen.push_back(pool[pool.size() - 1 - k]);
            }
            std::sort(chosen.begin(), chosen.end());
        }
        if (chosen.empty()) continue;  // empty neighborhood -> zero mean vector
        double inv = 1.0 / static_cast<double>(chosen.size());
        for (int j : chosen) s.triplets.emplace_back(i, j, inv);
    }
    return s;
}

ag::Var GraphSAGE::forward(const ag::Var& h0, Rng* rng) const {
    ag::Var h = h0;
    size_t n_layers = w_.size();
    for (size_t l = 0; l < n_layers; ++l) {
        ag::SparseMat s = mean_matrix(rng, cfg_.sample_sizes[l]);
        ag::Var agg = ag::sparse_matmul(s, h);
        ag::Var z = ag::matmul(ag::concat_cols({h, agg}), w_[l]);
        h = (l + 1 < n_layers) ? ag::relu(z) : ag::softmax_rows(z);
    }
    return h;
}

Mat GraphSAGE::predict(const Mat& h0) const {
    return forward(ag::constant(h0), nullptr)->val;
}

FitResult GraphSAGE::fit(const Mat& h0, const std::vector<int>& train_idx,
                         const std::vector<int>& train_labels,
                         const std::vector<int>& val_idx,
                         const std::vector<int>& val_labels, const FitOptions& opts) {
    ag::Var h0c = ag::constant(h0);
    Rng rng(opts.seed);
    auto fwd = [&](int epoch) {
        // epoch < 0: evaluation pass, full neighborhoods
        return epoch < 0 ? forward(h0c, nullptr) : forward(h0c, &rng);
    };
    return fit_graph_model(fwd, params(), train_idx, train_labels, val_idx, val_labels,
                           opts);
}

// ---------------------------------------------------------------------------
// Node2vec+ walks

std::vector<std::vector<int>> node2vec_walks(const WeightedAdjacency& g,
                                             const Node2VecConfig& cfg) {
    if (cfg.p <= 0.0 || cfg.q <= 0.0)
        throw std::invalid_argument("node2vec: p and q must be positive");
    if (cfg.walk_length < 2) throw std::invalid_argument("node2vec: walk length < 2");
    int n = g.n();
    std::vector<double> mean_weight(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = g.neighbors(i);
        size_t deg = 0;
        double tot = 0.0;
        for (const auto& [j, w] : nbrs)
            if (w != 0.0) {
                ++deg;
                tot += w;
            }
        mean_weight[i] = deg ? tot / static_cast<double>(deg) : 0.0;
    }
    Rng base(cfg.seed);
    std::vector<std::vector<int>> walks;
    for (int start = 0; start < n; ++start) {
        for (int wk = 0; wk < cfg.walks_per_node; ++wk) {
            Rng rng = base.fork(static_cast<uint64_t>(start) * 1000003ULL + wk);
            std::vector<int> walk{start};
            int prev = -1;
            while (static_cast<int>(walk.size()) < cfg.walk_length) {
                int cur = walk.back();
                const auto& nbrs = g.neighbors(cur);
                std::vector<double> probs;
                std::vector<int> cands;
                double total = 0.0;
                for (const auto& [x, w] : nbrs) {
                    if (w == 0.0) continue;
                    double alpha;
                    if (prev < 0) {
                        alpha = 1.0;  // first step is unbiased
                    } else if (x == prev) {
                        alpha = 1.0 / cfg.p;
                    } else if (g.get(x, prev) >= cfg.beta * mean_weight[x]) {
                        alpha = 1.0;  // true neighbor of the previous node
                    } else {
                        alpha = 1.0 / cfg.q;
                    }
                    cands.push_back(x);
                    probs.push_back(w * alpha);
                    total += w * alpha;
                }
                if (cands.empty() || total <= 0.0) break;  // dangling node
                double r = rng.uniform() * total;
                size_t pick = 0;
                for (; pick + 1 < probs.size(); ++pick) {
                    r -= probs[pick];
                    if (r < 0.0) break;
                }
                prev = cur;
                walk.push_back(cands[pick]);
            }
            if (walk.size() >= 2) walks.push_back(std::move(walk));
        }
    }
    return walks;
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

Mat skipgram_embed(const std::vector<std::vector<int>>& walks, const Node2VecConfig& cfg,
                   int n_nodes) {
    if (walks.empty()) throw std::invalid_argument("skipgram: no walks");
    Rng rng(cfg.seed ^ 0x5367u);
    Mat in(n_nodes, cfg.dim), out(n_nodes, cfg.dim);
    double r0 = 0.5 / cfg.dim;
    for (int i = 0; i < n_nodes; ++i)
        for (int d = 0; d < cfg.dim; ++d) {
            in(i, d) = rng.uniform(-r0, r0);
            out(i, d) = 0.0;
        }

    // unigram^0.75 noise distribution over walk occurrences
    std::vector<double> freq(n_nodes, 0.0);
    size_t total_tokens = 0;
    for (const auto& w : walks) {
        for (int node : w) freq[node] += 1.0;
        total_tokens += w.size();
    }
    std::vector<double> noise_cdf(n_nodes, 0.0);
    double acc = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
        acc += std::pow(freq[i], 0.75);
        noise_cdf[i] = acc;
    }
    if (acc <= 0.0) throw std::invalid_argument("skipgram: empty walks");
    auto sample_noise = [&]() {
        double r = rng.uniform() * acc;
        return static_cast<int>(std::lower_bound(noise_cdf.begin(), noise_cdf.end(), r) -
                                noise_cdf.begin());
    };

    double sigma = 0.0;
    auto sgd_pair = [&](int center, int context, double lr) {
        // positive pair plus cfg.negatives noise samples
        Eigen::RowVectorXd grad_center = Eigen::RowVectorXd::Zero(cfg.dim);
        for (int s = 0; s <= cfg.negatives; ++s) {
            int target = s == 0 ? context : sample_noise();
            double label = s == 0 ? 1.0 : 0.0;
            if (s > 0 && target == context) continue;
            double dot = in.row(center).dot(out.row(target));
            sigma = 1.0 / (1.0 + std::exp(-dot));
            double g = (sigma - label) * lr;
            grad_center += g * out.row(target);
            out.row(target) -= g * in.row(center);
        }
        in.row(center) -= grad_center;
    };

    size_t pairs_total = static_cast<size_t>(cfg.epochs) * total_tokens;
    size_t pairs_done = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& walk : walks) {
            for (size_t i = 0; i < walk.size(); ++i) {
                double lr = cfg.lr * std::max(1e-4, 1.0 - static_cast<double>(pairs_done) /
                                                             static_cast<double>(pairs_total));
                ++pairs_done;
                size_t lo = i >= static_cast<size_t>(cfg.window) ? i - cfg.window : 0;
                size_t hi = std::min(walk.size() - 1, i + cfg.window);
                for (size_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    sgd_pair(walk[i], walk[j], lr);
                }
            }
        }
    }
    return in;
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression::LogisticRegression(int in_dim, int num_labels)
    : w_(ag::param("lr_w", Mat::Zero(in_dim, num_labels))),
      b_(ag::param("lr_b", Mat::Zero(1, num_labels))) {}

Mat LogisticRegression::predict(const Mat& x) const {
    return ag::softmax_rows(ag::add(ag::matmul(ag::constant(x), w_), b_))->val;
}

FitResult LogisticRegression::fit(const Mat& x, const std::vector<int>& y,
                                  const FitOptions& opts) {
    auto ps = params();
    ag::Adam adam;
    adam.lr = opts.lr;
    FitResult res;
    ag::Var xc = ag::constant(x);
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        ag::Var probs = ag::softmax_rows(ag::add(ag::matmul(xc, w_), b_));
        ag::Var loss = ag::cross_entropy(probs, y);
        res.train_loss.push_back(epoch_loss_guard(loss->scalar()));
        ag::zero_grad(ps);
        ag::backward(loss);
        adam.step(ps);
    }
    return res;
}

Mat concat_probs(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("concat_probs: row mismatch");
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

}  // namespace geoloc
