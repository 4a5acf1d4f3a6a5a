#include "geoloc/textfeat.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "geoloc/ingest.hpp"  // casefold

namespace geoloc {

namespace {

bool is_number_token(const std::string& s) {
    bool digit_seen = false;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isdigit(c))
            digit_seen = true;
        else if (c != '.' && c != ',')
            return false;
    }
    return digit_seen;
}

bool is_url_token(const std::string& s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0 ||
           s.rfind("www.", 0) == 0;
}

const std::unordered_set<std::string> kPlaceholders = {"<mention>", "<url>", "<num>",
                                                       "<pad>", "<unk>"};

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string word;
    auto emit_plain = [&](const std::string& w) {
        // split the remainder on non-alphanumeric characters
        std::string cur;
        auto flush = [&]() {
            if (cur.empty()) return;
            out.push_back(is_number_token(cur) ? "<num>" : casefold(cur));
            cur.clear();
        };
        for (char ch : w) {
            unsigned char c = static_cast<unsigned char>(ch);
            if (std::isalnum(c) || c >= 0x80 || c == '\'')
                cur.push_back(ch);
            else
                flush();
        }
        flush();
    };
    while (ss >> word) {
        if (is_url_token(casefold(word))) {
            out.push_back("<url>");
        } else if (word[0] == '@') {
            out.push_back("<mention>");
        } else if (word[0] == '#') {
            emit_plain(word.substr(1));
        } else {
            emit_plain(word);
        }
    }
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& user_tokens,
                             size_t min_freq) {
    Vocabulary v;
    for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
    for (const auto& toks : user_tokens) {
        std::unordered_set<std::string> uniq(toks.begin(), toks.end());
        for (const auto& t : uniq) ++v.doc_freq_[t];
    }
    std::vector<std::string> kept;
    for (const auto& [tok, df] : v.doc_freq_)
        if (df >= min_freq && !v.ids_.count(tok)) kept.push_back(tok);
    std::sort(kept.begin(), kept.end());  // deterministic id assignment
    for (const auto& t : kept) {
        v.ids_[t] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(t);
    }
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

size_t Vocabulary::doc_freq(const std::string& token) const {
    auto it = doc_freq_.find(token);
    return it == doc_freq_.end() ? 0 : it->second;
}

double chi2_statistic(const std::vector<size_t>& present_per_label,
                      const std::vector<size_t>& users_per_label) {
    size_t L = users_per_label.size();
    size_t total = 0, present_total = 0;
    for (size_t l = 0; l < L; ++l) {
        total += users_per_label[l];
        present_total += present_per_label[l];
    }
    if (present_total == 0 || present_total == total || total == 0) return 0.0;
    double chi2 = 0.0;
    double p_present = static_cast<double>(present_total) / static_cast<double>(total);
    for (size_t l = 0; l < L; ++l) {
        double col = static_cast<double>(users_per_label[l]);
        if (col == 0.0) continue;
        double e1 = col * p_present;          // expected present
        double e0 = col * (1.0 - p_present);  // expected absent
        double o1 = static_cast<double>(present_per_label[l]);
        double o0 = col - o1;
        chi2 += (o1 - e1) * (o1 - e1) / e1 + (o0 - e0) * (o0 - e0) / e0;
    }
    return chi2;
}

LIWTable chi2_liw(const std::vector<std::vector<std::string>>& user_tokens,
                  const std::vector<int>& labels, int num_labels, size_t top_k,
                  size_t min_freq) {
    if (user_tokens.size() != labels.size())
        throw std::invalid_argument("chi2_liw: users/labels size mismatch");
    if (num_labels < 2) throw std::invalid_argument("chi2_liw: need >= 2 labels");

    std::vector<size_t> users_per_label(num_labels, 0);
    for (int l : labels) users_per_label.at(l)++;

    std::unordered_map<std::string, std::vector<size_t>> present;
    for (size_t u = 0; u < user_tokens.size(); ++u) {
        std::unordered_set<std::string> uniq(user_tokens[u].begin(), user_tokens[u].end());
        for (const auto& t : uniq) {
            if (kPlaceholders.count(t)) continue;
            auto [it, fresh] = present.try_emplace(t, num_labels, 0);
            it->second[labels[u]]++;
        }
    }

    struct Scored {
        std::string token;
        double chi2;
        const std::vector<size_t>* counts;
    };
    std::vector<Scored> scored;
    for (const auto& [tok, counts] : present) {
        size_t df = 0;
        for (size_t c : counts) df += c;
        if (df < min_freq) continue;
        scored.push_back({tok, chi2_statistic(counts, users_per_label), &counts});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.chi2 != b.chi2) return a.chi2 > b.chi2;
        return a.token < b.token;  // deterministic tie order
    });
    if (scored.size() > top_k) scored.resize(top_k);

    LIWTable table;
    table.num_labels = num_labels;
    size_t total_users = labels.size();
    table.prior.resize(num_labels);
    for (int l = 0; l < num_labels; ++l)
        table.prior[l] = static_cast<double>(users_per_label[l]) /
                         static_cast<double>(total_users);
    for (const auto& s : scored) {
        table.tokens.push_back(s.token);
        table.chi2.push_back(s.chi2);
        size_t present_total = 0;
        for (size_t c : *s.counts) present_total += c;
        std::vector<double> row(num_labels);
        for (int l = 0; l < num_labels; ++l) {
            // add-one smoothed P(label | token present)
            row[l] = std::log((static_cast<double>((*s.counts)[l]) + 1.0) /
                              (static_cast<double>(present_total) + num_labels));
        }
        table.scores.push_back(std::move(row));
    }
    return table;
}

std::vector<double> liw_predict(const std::vector<std::string>& tokens,
                                const LIWTable& table) {
    std::unordered_set<std::string> uniq(tokens.begin(), tokens.end());
    std::vector<double> logits(table.num_labels, 0.0);
    bool any = false;
    for (size_t k = 0; k < table.tokens.size(); ++k) {
        if (!uniq.count(table.tokens[k])) continue;
        any = true;
        for (int l = 0; l < table.num_labels; ++l) logits[l] += table.scores[k][l];
    }
    if (!any) return table.prior;
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

void LIWTable::save_csv(const std::string& path, const std::string& header_comment) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "token,chi2";
    for (int l = 0; l < num_labels; ++l) out << ",score_" << l;
    out << "\n";
    for (size_t k = 0; k < tokens.size(); ++k) {
        out << tokens[k] << ',' << chi2[k];
        for (double s : scores[k]) out << ',' << s;
        out << '\n';
    }
}

EmbeddingTable EmbeddingTable::random(const Vocabulary& vocab, int dim, uint64_t seed) {
    EmbeddingTable t;
    t.dim = dim;
    t.rows.assign(vocab.size(), std::vector<double>(dim, 0.0));
    Rng rng(seed);
    double r = 0.5 / dim;
    for (int i = 1; i < vocab.size(); ++i)  // row 0 stays zero (padding)
        for (int d = 0; d < dim; ++d) t.rows[i][d] = rng.uniform(-r, r);
    return t;
}

EmbeddingTable EmbeddingTable::load(const std::string& path, const Vocabulary& vocab,
                                    uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    std::string line;
    int dim = -1;
    std::unordered_map<std::string, std::vector<double>> file_rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> vec;
        double v;
        while (ss >> v) vec.push_back(v);
        if (dim < 0) dim = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != dim)
            throw std::runtime_error("embedding file has inconsistent dimensions: " +
                                     std::to_string(vec.size()) + " vs " +
                                     std::to_string(dim));
        file_rows[word] = std::move(vec);
    }
    if (dim <= 0) throw std::runtime_error("embedding file is empty: " + path);
    EmbeddingTable t = random(vocab, dim, seed);
    for (int i = 2; i < vocab.size(); ++i) {
        auto it = file_rows.find(vocab.token_of(i));
        if (it != file_rows.end()) t.rows[i] = it->second;
    }
    return t;
}

}  // namespace geoloc
