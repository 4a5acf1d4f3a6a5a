#pragma once

#include <stdexcept>

#include "geoloc/autograd.hpp"
#include "geoloc/graph.hpp"
#include "geoloc/rng.hpp"
#include "geoloc/textfeat.hpp"

namespace geoloc {

using ag::Mat;

struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitOptions {
    int epochs = 50;
    int batch = 32;      // 0 = full batch
    double lr = 1e-3;
    int patience = 5;    // early stop on validation loss; <=0 disables
    uint64_t seed = 0;
};

struct FitResult {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch (empty without validation)
};

// ---------------------------------------------------------------------------
// Trans-TXT: multi-head attention with a learned context query, pooling each
// user's token sequence into one representation.

struct TransformerConfig {
    int d = 48;
    int heads = 6;
    int max_len = 64;
    int ff_hidden = 64;
    int num_labels = 0;
    int vocab_size = 0;
};

class Transformer {
public:
    Transformer(TransformerConfig cfg, const EmbeddingTable* pretrained, uint64_t seed);

    /// Probability row over labels for one non-empty token sequence.
    ag::Var forward(const std::vector<int>& ids) const;
    /// Batch prediction; empty sequences fall back to `prior`.
    Mat predict(const std::vector<std::vector<int>>& seqs,
                const std::vector<double>& prior) const;
    FitResult fit(const std::vector<std::vector<int>>& seqs, const std::vector<int>& labels,
                  const std::vector<std::vector<int>>& val_seqs,
                  const std::vector<int>& val_labels, const FitOptions& opts);

    std::vector<ag::Var> params() const;
    const TransformerConfig& config() const { return cfg_; }

private:
    TransformerConfig cfg_;
    Mat posenc_;
    ag::Var emb_, qctx_, wo_, w1_, b1_, w2_, b2_;
    std::vector<ag::Var> wq_, wk_, wv_;
};

// ---------------------------------------------------------------------------
// RGCN over a multiplex graph: per-relation message passing with edge weights
// normalized by the weighted degree, plus a self loop term and bias.

struct RGCNConfig {
    std::vector<int> widths;  // e.g. {L, 128, 128, L}
};

class RGCN {
public:
    RGCN(const MultiplexGraph& g, RGCNConfig cfg, uint64_t seed);

    ag::Var forward(const ag::Var& h0) const;
    Mat predict(const Mat& h0) const;
    FitResult fit(const Mat& h0, const std::vector<int>& train_idx,
                  const std::vector<int>& train_labels, const std::vector<int>& val_idx,
                  const std::vector<int>& val_labels, const FitOptions& opts);

    std::vector<ag::Var> params() const;

private:
    RGCNConfig cfg_;
    int n_ = 0;
    std::vector<ag::SparseMat> norm_adj_;          // one per relation
    std::vector<std::vector<ag::Var>> w_rel_;      // [layer][relation]
    std::vector<ag::Var> w_self_, bias_;
};

// ---------------------------------------------------------------------------
// GraphSAGE with mean aggregation over sampled neighborhoods.

struct SAGEConfig {
    std::vector<int> widths;        // e.g. {L, 64, L}
    std::vector<int> sample_sizes;  // per layer, e.g. {25, 10}; 0 = all
};

class GraphSAGE {
public:
    GraphSAGE(const WeightedAdjacency& g, SAGEConfig cfg, uint64_t seed);

    /// Sampled forward; pass sample_override=0 entries (or a null rng) to use
    /// full neighborhoods.
    ag::Var forward(const ag::Var& h0, Rng* rng) const;
    Mat predict(const Mat& h0) const;  // full neighborhoods
    FitResult fit(const Mat& h0, const std::vector<int>& train_idx,
                  const std::vector<int>& train_labels, const std::vector<int>& val_idx,
                  const std::vector<int>& val_labels, const FitOptions& opts);

    std::vector<ag::Var> params() const;

private:
    ag::SparseMat mean_matrix(Rng* rng, int sample_size) const;
    SAGEConfig cfg_;
    const WeightedAdjacency* graph_;
    std::vector<ag::Var> w_;
};

// ---------------------------------------------------------------------------
// Node2vec+ walks and skip-gram embeddings.

struct Node2VecConfig {
    double p = 1.0;
    double q = 1.0;
    double beta = 1.0;       // noisy-edge factor for the weighted in-out rule
    int walk_length = 80;
    int walks_per_node = 10;
    int window = 5;
    int dim = 128;
    int negatives = 5;
    int epochs = 3;
    double lr = 0.025;
    uint64_t seed = 0;
};

std::vector<std::vector<int>> node2vec_walks(const WeightedAdjacency& g,
                                             const Node2VecConfig& cfg);

Mat skipgram_embed(const std::vector<std::vector<int>>& walks, const Node2VecConfig& cfg,
                   int n_nodes);

// ---------------------------------------------------------------------------
// Softmax regression; doubles as the stacking meta-classifier.

class LogisticRegression {
public:
    LogisticRegression(int in_dim, int num_labels);  // zero init -> uniform output

    Mat predict(const Mat& x) const;
    FitResult fit(const Mat& x, const std::vector<int>& y, const FitOptions& opts);

    std::vector<ag::Var> params() const { return {w_, b_}; }

private:
    ag::Var w_, b_;
};

/// Stacks base-model probability outputs: meta input = [probs_a || probs_b].
Mat concat_probs(const Mat& a, const Mat& b);

}  // namespace geoloc
