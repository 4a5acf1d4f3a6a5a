#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "geoloc/rng.hpp"

namespace geoloc {

/// Case-folded tokens; URLs -> <url>, @mentions -> <mention>, numbers ->
/// <num>, hashtag mark stripped.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    /// Builds from per-user token lists; tokens below min_freq document
    /// frequency are dropped.
    static Vocabulary build(const std::vector<std::vector<std::string>>& user_tokens,
                            size_t min_freq);

    int id_of(const std::string& token) const;  // kUnk when absent
    const std::string& token_of(int id) const { return tokens_[id]; }
    int size() const { return static_cast<int>(tokens_.size()); }
    size_t doc_freq(const std::string& token) const;

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_{"<pad>", "<unk>"};
    std::unordered_map<std::string, size_t> doc_freq_;
};

struct LIWTable {
    std::vector<std::string> tokens;            // selected, ordered by chi2 desc
    std::vector<double> chi2;                   // parallel to tokens
    std::vector<std::vector<double>> scores;    // [token][label] log P(label|present)
    std::vector<double> prior;                  // training label distribution
    int num_labels = 0;

    void save_csv(const std::string& path, const std::string& header_comment = "") const;
};

/// chi2 statistic of the 2xL presence/label contingency table for one token.
/// Degenerate tokens (present in all users or none) score 0.
double chi2_statistic(const std::vector<size_t>& present_per_label,
                      const std::vector<size_t>& users_per_label);

/// Select top_k tokens by chi2 over user-level binary presence.
/// Placeholder tokens (<mention>, <url>, <num>, <pad>, <unk>) are excluded.
LIWTable chi2_liw(const std::vector<std::vector<std::string>>& user_tokens,
                  const std::vector<int>& labels, int num_labels, size_t top_k,
                  size_t min_freq = 1);

/// Softmax of summed per-label log scores over the user's distinct LIW
/// tokens; falls back to the training prior when no LIW token occurs.
std::vector<double> liw_predict(const std::vector<std::string>& tokens,
                                const LIWTable& table);

struct EmbeddingTable {
    int dim = 0;
    std::vector<std::vector<double>> rows;  // [vocab.size()][dim], row 0 zero

    static EmbeddingTable load(const std::string& path, const Vocabulary& vocab,
                               uint64_t seed);
    static EmbeddingTable random(const Vocabulary& vocab, int dim, uint64_t seed);
};

}  // namespace geoloc
