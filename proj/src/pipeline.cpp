#include "geoloc/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace geoloc {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& scope) {
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw ConfigError("unknown config key: " + scope + key);
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    reject_unknown(j, {"paths", "ingest", "graph", "labels", "text", "model", "eval",
                       "seed", "threads", "synth"},
                   "");
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        reject_unknown(p, {"workdir", "records", "profiles", "gazetteer", "embeddings"},
                       "paths.");
        get_to_if(p, "workdir", c.workdir);
        get_to_if(p, "records", c.records_path);
        get_to_if(p, "profiles", c.profiles_path);
        get_to_if(p, "gazetteer", c.gazetteer_path);
        get_to_if(p, "embeddings", c.embeddings_path);
    }
    if (j.contains("ingest")) {
        const auto& p = j["ingest"];
        reject_unknown(p, {"r_match_km"}, "ingest.");
        get_to_if(p, "r_match_km", c.r_match_km);
    }
    if (j.contains("graph")) {
        const auto& p = j["graph"];
        reject_unknown(p, {"celebrity_threshold", "use_follower_layer"}, "graph.");
        get_to_if(p, "celebrity_threshold", c.celebrity_threshold);
        get_to_if(p, "use_follower_layer", c.use_follower_layer);
    }
    if (j.contains("labels")) {
        const auto& p = j["labels"];
        reject_unknown(p, {"mode", "min_users", "min_bucket"}, "labels.");
        get_to_if(p, "mode", c.label_mode);
        get_to_if(p, "min_users", c.min_users);
        get_to_if(p, "min_bucket", c.min_bucket);
        if (c.label_mode != "city" && c.label_mode != "kdtree")
            throw ConfigError("labels.mode must be 'city' or 'kdtree'");
    }
    if (j.contains("text")) {
        const auto& p = j["text"];
        reject_unknown(p,
                       {"min_freq", "liw_top_k", "d", "heads", "max_len", "ff_hidden",
                        "epochs", "batch", "lr", "patience"},
                       "text.");
        get_to_if(p, "min_freq", c.min_freq);
        get_to_if(p, "liw_top_k", c.liw_top_k);
        get_to_if(p, "d", c.transformer.d);
        get_to_if(p, "heads", c.transformer.heads);
        get_to_if(p, "max_len", c.transformer.max_len);
        get_to_if(p, "ff_hidden", c.transformer.ff_hidden);
        get_to_if(p, "epochs", c.text_epochs);
        get_to_if(p, "batch", c.text_batch);
        get_to_if(p, "lr", c.text_lr);
        get_to_if(p, "patience", c.text_patience);
    }
    if (j.contains("model")) {
        const auto& p = j["model"];
        reject_unknown(p,
                       {"name", "hidden", "layers", "sample_sizes", "epochs", "lr",
                        "patience", "n2v"},
                       "model.");
        get_to_if(p, "name", c.model);
        get_to_if(p, "hidden", c.gnn_hidden);
        get_to_if(p, "layers", c.gnn_layers);
        get_to_if(p, "sample_sizes", c.sage_samples);
        get_to_if(p, "epochs", c.gnn_epochs);
        get_to_if(p, "lr", c.gnn_lr);
        get_to_if(p, "patience", c.gnn_patience);
        if (p.contains("n2v")) {
            const auto& q = p["n2v"];
            reject_unknown(q,
                           {"p", "q", "beta", "walk_length", "walks_per_node", "window",
                            "dim", "negatives", "epochs", "lr"},
                           "model.n2v.");
            get_to_if(q, "p", c.n2v.p);
            get_to_if(q, "q", c.n2v.q);
            get_to_if(q, "beta", c.n2v.beta);
            get_to_if(q, "walk_length", c.n2v.walk_length);
            get_to_if(q, "walks_per_node", c.n2v.walks_per_node);
            get_to_if(q, "window", c.n2v.window);
            get_to_if(q, "dim", c.n2v.dim);
            get_to_if(q, "negatives", c.n2v.negatives);
            get_to_if(q, "epochs", c.n2v.epochs);
            get_to_if(q, "lr", c.n2v.lr);
        }
        static const std::set<std::string> kModels = {"trans_txt", "rgcn_ext",
                                                      "graphsage_ext", "n2v_ext"};
        if (!kModels.count(c.model))
            throw ConfigError("unknown model name: " + c.model);
    }
    if (j.contains("eval")) {
        const auto& p = j["eval"];
        reject_unknown(p, {"k"}, "eval.");
        get_to_if(p, "k", c.folds);
    }
    get_to_if(j, "seed", c.seed);
    get_to_if(j, "threads", c.threads);
    if (j.contains("synth")) {
        const auto& p = j["synth"];
        reject_unknown(p,
                       {"n_users", "n_cities", "p_in", "p_out", "hubs_per_city",
                        "hub_attach_prob", "tokens_per_user", "liw_strength", "jitter_km",
                        "shared_vocab", "city_vocab", "city_centers"},
                       "synth.");
        get_to_if(p, "n_users", c.synth.n_users);
        get_to_if(p, "n_cities", c.synth.n_cities);
        get_to_if(p, "p_in", c.synth.p_in);
        get_to_if(p, "p_out", c.synth.p_out);
        get_to_if(p, "hubs_per_city", c.synth.hubs_per_city);
        get_to_if(p, "hub_attach_prob", c.synth.hub_attach_prob);
        get_to_if(p, "tokens_per_user", c.synth.tokens_per_user);
        get_to_if(p, "liw_strength", c.synth.liw_strength);
        get_to_if(p, "jitter_km", c.synth.jitter_km);
        get_to_if(p, "shared_vocab", c.synth.shared_vocab);
        get_to_if(p, "city_vocab", c.synth.city_vocab);
        if (p.contains("city_centers")) {
            for (const auto& cc : p["city_centers"])
                c.synth.city_centers.push_back(
                    GeoPoint{cc.at(0).get<double>(), cc.at(1).get<double>()});
        }
    }
    c.synth.seed = c.seed;
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string PipelineConfig::to_json() const {
    ordered_json j;
    j["paths"]["workdir"] = workdir;
    j["paths"]["records"] = records_path;
    j["paths"]["profiles"] = profiles_path;
    j["paths"]["gazetteer"] = gazetteer_path;
    j["paths"]["embeddings"] = embeddings_path;
    j["ingest"]["r_match_km"] = r_match_km;
    j["graph"]["celebrity_threshold"] = celebrity_threshold;
    j["graph"]["use_follower_layer"] = use_follower_layer;
    j["labels"]["mode"] = label_mode;
    j["labels"]["min_users"] = min_users;
    j["labels"]["min_bucket"] = min_bucket;
    j["text"] = {{"min_freq", min_freq},   {"liw_top_k", liw_top_k},
                 {"d", transformer.d},     {"heads", transformer.heads},
                 {"max_len", transformer.max_len}, {"ff_hidden", transformer.ff_hidden},
                 {"epochs", text_epochs},  {"batch", text_batch},
                 {"lr", text_lr},          {"patience", text_patience}};
    j["model"] = {{"name", model},        {"hidden", gnn_hidden},
                  {"layers", gnn_layers}, {"sample_sizes", sage_samples},
                  {"epochs", gnn_epochs}, {"lr", gnn_lr},
                  {"patience", gnn_patience}};
    j["model"]["n2v"] = {{"p", n2v.p},
                         {"q", n2v.q},
                         {"beta", n2v.beta},
                         {"walk_length", n2v.walk_length},
                         {"walks_per_node", n2v.walks_per_node},
                         {"window", n2v.window},
                         {"dim", n2v.dim},
                         {"negatives", n2v.negatives},
                         {"epochs", n2v.epochs},
                         {"lr", n2v.lr}};
    j["eval"]["k"] = folds;
    j["seed"] = seed;
    j["threads"] = threads;
    j["synth"] = {{"n_users", synth.n_users},
                  {"n_cities", synth.n_cities},
                  {"p_in", synth.p_in},
                  {"p_out", synth.p_out},
                  {"hubs_per_city", synth.hubs_per_city},
                  {"hub_attach_prob", synth.hub_attach_prob},
                  {"tokens_per_user", synth.tokens_per_user},
                  {"liw_strength", synth.liw_strength},
                  {"jitter_km", synth.jitter_km},
                  {"shared_vocab", synth.shared_vocab},
                  {"city_vocab", synth.city_vocab}};
    return j.dump(2);
}

uint64_t PipelineConfig::hash() const {
    // the artifact directory is not part of the config identity: the same
    // pipeline run in a different workdir must produce byte-identical artifacts
    ordered_json j = ordered_json::parse(to_json());
    j["paths"].erase("workdir");
    return fnv1a64(j.dump(2));
}

// ---------------------------------------------------------------------------
// Artifact plumbing

namespace {

std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

std::string records_of(const PipelineConfig& c) {
    return c.records_path.empty() ? c.workdir + "/data/records.jsonl" : c.records_path;
}
std::string profiles_of(const PipelineConfig& c) {
    return c.profiles_path.empty() ? c.workdir + "/data/profiles.jsonl" : c.profiles_path;
}
std::string gazetteer_of(const PipelineConfig& c) {
    return c.gazetteer_path.empty() ? c.workdir + "/data/gazetteer.tsv" : c.gazetteer_path;
}

void require_artifact(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw MissingArtifact("missing artifact " + path + "; run `" + producer +
                              "` first");
}

std::string hash_comment(const PipelineConfig& c) {
    return "config_hash=" + hex64(c.hash());
}

// Upstream artifacts (ground truth, graph, labels) depend only on the data
// sections of the config, so switching model or eval settings does not
// invalidate them.
uint64_t data_hash(const PipelineConfig& c) {
    json full = json::parse(c.to_json());
    ordered_json j;
    for (const char* key : {"paths", "ingest", "graph", "labels", "synth"})
        j[key] = full.at(key);
    j["paths"].erase("workdir");
    j["seed"] = full.at("seed");
    return fnv1a64(j.dump(2));
}

std::string data_hash_comment(const PipelineConfig& c) {
    return "config_hash=" + hex64(data_hash(c));
}

uint64_t read_artifact_hash(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# config_hash=", 0) == 0)
            return std::stoull(line.substr(14), nullptr, 16);
        if (!line.empty() && line[0] != '#') break;
    }
    return 0;
}

void check_hash(const PipelineConfig& c, const std::string& path, bool force) {
    uint64_t h = read_artifact_hash(path);
    if (!force && h != data_hash(c))
        throw ConfigError("artifact " + path +
                          " was produced by a different config (hash mismatch); rerun "
                          "the producing stage or pass --force");
}

struct LoadedUsers {
    std::vector<UserRecord> users;
    Gazetteer gazetteer;
};

LoadedUsers load_users(const PipelineConfig& cfg) {
    require_artifact(records_of(cfg), "synth (or point paths.records at your data)");
    require_artifact(gazetteer_of(cfg), "synth (or point paths.gazetteer at your data)");
    LoadedUsers d;
    d.users = parse_records(records_of(cfg));
    if (fs::exists(profiles_of(cfg))) parse_profiles(profiles_of(cfg), d.users);
    d.gazetteer = Gazetteer::load_tsv(gazetteer_of(cfg));
    return d;
}

std::vector<GroundTruth> load_ground_truth_csv(const std::string& path) {
    std::ifstream in(path);
    std::vector<GroundTruth> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string f;
        GroundTruth t;
        std::getline(ss, t.user_id, ',');
        std::getline(ss, f, ',');
        t.city = std::stoll(f);
        std::getline(ss, f, ',');
        t.point.lat = std::stod(f);
        std::getline(ss, f, ',');
        t.point.lon = std::stod(f);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

void stage_synth(const PipelineConfig& cfg) {
    fs::create_directories(cfg.workdir + "/data");
    synth_generate(cfg.synth, records_of(cfg), profiles_of(cfg), gazetteer_of(cfg));
}

void stage_ingest(const PipelineConfig& cfg) {
    auto d = load_users(cfg);
    fs::create_directories(cfg.workdir + "/ingest");
    std::ofstream out(cfg.workdir + "/ingest/ground_truth.csv");
    out.precision(17);
    out << "# " << data_hash_comment(cfg) << "\n";
    out << "user_id,geoname_id,lat,lon\n";
    size_t labeled = 0;
    for (const auto& u : d.users) {
        auto t = assign_ground_truth(u, d.gazetteer, cfg.r_match_km);
        if (!t) continue;
        out << t->user_id << ',' << t->city << ',' << t->point.lat << ','
            << t->point.lon << '\n';
        ++labeled;
    }
    ordered_json stats;
    stats["config_hash"] = hex64(cfg.hash());
    stats["users"] = d.users.size();
    stats["labeled_users"] = labeled;
    std::ofstream so(cfg.workdir + "/ingest/stats.json");
    so << stats.dump(2) << "\n";
}

void stage_build_graph(const PipelineConfig& cfg) {
    auto d = load_users(cfg);
    NodeIndex index;
    auto [m, xm] = build_mention_matrices(d.users, index);
    auto [mf, xmf] = filter_popular(m, xm, cfg.celebrity_threshold);
    std::vector<std::pair<std::string, WeightedAdjacency>> layers;
    layers.emplace_back("mention", extend_mention_network(mf, xmf));
    if (cfg.use_follower_layer) {
        auto [f, xf] = build_follower_matrices(d.users, index);
        if (f.nnz() > 0 || xf.cols() > 0) {
            auto [ff, xff] = filter_popular(f, xf, cfg.celebrity_threshold);
            layers.emplace_back("follower", extend_follower_network(ff, xff));
        }
    }
    MultiplexGraph g = assemble_multiplex(std::move(layers));
    fs::create_directories(cfg.workdir + "/graphs");
    save_multiplex(g, index, cfg.workdir + "/graphs/edges.tsv",
                   cfg.workdir + "/graphs/nodes.tsv", data_hash_comment(cfg));
}

void stage_build_labels(const PipelineConfig& cfg) {
    require_artifact(cfg.workdir + "/ingest/ground_truth.csv", "ingest");
    auto truths = load_ground_truth_csv(cfg.workdir + "/ingest/ground_truth.csv");
    LabelSpace ls;
    if (cfg.label_mode == "city") {
        auto d = load_users(cfg);
        ls = build_city_labels(truths, cfg.min_users, d.gazetteer);
    } else {
        ls = build_kdtree_labels(truths, cfg.min_bucket);
    }
    fs::create_directories(cfg.workdir + "/labels");
    ls.save_csv(cfg.workdir + "/labels/labels.csv", cfg.workdir + "/labels/assignment.csv",
                data_hash_comment(cfg));
}

void stage_profile_report(const PipelineConfig& cfg) {
    require_artifact(cfg.workdir + "/ingest/ground_truth.csv", "ingest");
    auto d = load_users(cfg);
    auto truths = load_ground_truth_csv(cfg.workdir + "/ingest/ground_truth.csv");
    DistanceCDF cdf = profile_distance_report(d.users, truths, d.gazetteer);
    fs::create_directories(cfg.workdir + "/reports");
    std::ofstream out(cfg.workdir + "/reports/profile_cdf.csv");
    out << "# " << hash_comment(cfg) << "\n";
    if (cdf.empty())
        out << "# empty: no user has both an unambiguous profile match and a ground truth\n";
    out << cdf.to_csv();
    ordered_json j;
    j["config_hash"] = hex64(cfg.hash());
    j["eligible_users"] = cdf.sorted_km.size();
    j["frac_below_10km"] = cdf.frac_below_10km;
    j["frac_below_161km"] = cdf.frac_below_161km;
    for (const auto& [q, km] : cdf.quantiles)
        j["quantiles"][std::to_string(q)] = km;
    std::ofstream jo(cfg.workdir + "/reports/profile_report.json");
    jo << j.dump(2) << "\n";
}

void stage_liw(const PipelineConfig& cfg) {
    require_artifact(cfg.workdir + "/labels/assignment.csv", "build-labels");
    auto d = load_users(cfg);
    LabelSpace ls = LabelSpace::load_csv(cfg.workdir + "/labels/labels.csv",
                                         cfg.workdir + "/labels/assignment.csv");
    std::vector<std::vector<std::string>> toks;
    std::vector<int> labels;
    for (const auto& u : d.users) {
        auto it = ls.assignment.find(u.user_id);
        if (it == ls.assignment.end()) continue;
        std::vector<std::string> ut;
        for (const auto& t : u.tweets) {
            auto tt = tokenize(t.text);
            ut.insert(ut.end(), tt.begin(), tt.end());
        }
        toks.push_back(std::move(ut));
        labels.push_back(it->second);
    }
    LIWTable table = chi2_liw(toks, labels, ls.num_labels(), cfg.liw_top_k, cfg.min_freq);
    fs::create_directories(cfg.workdir + "/features");
    table.save_csv(cfg.workdir + "/features/liw.csv", hash_comment(cfg));
}

// ---------------------------------------------------------------------------
// Model training shared by `train` and `evaluate`

namespace {

struct GraphData {
    MultiplexGraph graph;
    std::vector<std::string> node_names;          // node idx -> user id
    std::unordered_map<std::string, int> node_of;
    LabelSpace labels;
    std::vector<GroundTruth> truths;
    std::vector<std::vector<std::string>> tokens;  // per node
    std::vector<int> labeled_nodes;                // node idx with a label
    std::vector<int> node_label;                   // per node, -1 if unlabeled
};

GraphData load_graph_data(const PipelineConfig& cfg, bool force) {
    require_artifact(cfg.workdir + "/graphs/edges.tsv", "build-graph");
    require_artifact(cfg.workdir + "/labels/labels.csv", "build-labels");
    require_artifact(cfg.workdir + "/ingest/ground_truth.csv", "ingest");
    check_hash(cfg, cfg.workdir + "/graphs/edges.tsv", force);
    check_hash(cfg, cfg.workdir + "/labels/labels.csv", force);
    check_hash(cfg, cfg.workdir + "/ingest/ground_truth.csv", force);

    GraphData d;
    auto [graph, names] = load_multiplex(cfg.workdir + "/graphs/edges.tsv",
                                         cfg.workdir + "/graphs/nodes.tsv");
    d.graph = std::move(graph);
    d.node_names = std::move(names);
    for (size_t i = 0; i < d.node_names.size(); ++i)
        d.node_of[d.node_names[i]] = static_cast<int>(i);
    d.labels = LabelSpace::load_csv(cfg.workdir + "/labels/labels.csv",
                                    cfg.workdir + "/labels/assignment.csv");
    d.truths = load_ground_truth_csv(cfg.workdir + "/ingest/ground_truth.csv");

    auto users = load_users(cfg).users;
    d.tokens.assign(d.node_names.size(), {});
    for (const auto& u : users) {
        auto it = d.node_of.find(u.user_id);
        if (it == d.node_of.end()) continue;
        auto& ut = d.tokens[it->second];
        for (const auto& t : u.tweets) {
            auto tt = tokenize(t.text);
            ut.insert(ut.end(), tt.begin(), tt.end());
        }
    }
    d.node_label.assign(d.node_names.size(), -1);
    for (size_t i = 0; i < d.node_names.size(); ++i) {
        auto it = d.labels.assignment.find(d.node_names[i]);
        if (it != d.labels.assignment.end()) {
            d.node_label[i] = it->second;
            d.labeled_nodes.push_back(static_cast<int>(i));
        }
    }
    if (d.labeled_nodes.empty())
        throw std::runtime_error("no labeled user appears in the graph");
    return d;
}

struct TextFeatures {
    Mat h0;           // n x L meta-combined scores
    Mat trans_probs;  // n x L
    Mat liw_probs;    // n x L
};

/// Trains the transformer and LIW scorer on `sub_train`, the stacking
/// meta-classifier on `meta_train`, and returns per-node label scores.
TextFeatures build_text_features(const PipelineConfig& cfg, const GraphData& d,
                                 const std::vector<int>& sub_train,
                                 const std::vector<int>& meta_train, uint64_t seed) {
    int L = d.labels.num_labels();
    int n = static_cast<int>(d.node_names.size());

    std::vector<std::vector<std::string>> train_tokens;
    std::vector<int> train_labels;
    for (int i : sub_train) {
        train_tokens.push_back(d.tokens[i]);
        train_labels.push_back(d.node_label[i]);
    }
    Vocabulary vocab = Vocabulary::build(train_tokens, cfg.min_freq);

    std::vector<std::vector<int>> seqs(n);
    for (int i = 0; i < n; ++i)
        for (const auto& t : d.tokens[i]) seqs[i].push_back(vocab.id_of(t));

    std::vector<double> prior(L, 0.0);
    for (int l : train_labels) prior[l] += 1.0;
    for (double& p : prior) p /= static_cast<double>(train_labels.size());

    TransformerConfig tc = cfg.transformer;
    tc.num_labels = L;
    tc.vocab_size = vocab.size();
    EmbeddingTable emb = cfg.embeddings_path.empty()
                             ? EmbeddingTable::random(vocab, tc.d, seed ^ 0xe3b)
                             : EmbeddingTable::load(cfg.embeddings_path, vocab, seed ^ 0xe3b);
    Transformer trans(tc, &emb, seed);

    std::vector<std::vector<int>> tr_seqs, va_seqs;
    std::vector<int> tr_y, va_y;
    for (int i : sub_train) {
        tr_seqs.push_back(seqs[i]);
        tr_y.push_back(d.node_label[i]);
    }
    for (int i : meta_train) {
        va_seqs.push_back(seqs[i]);
        va_y.push_back(d.node_label[i]);
    }
    FitOptions fo{cfg.text_epochs, cfg.text_batch, cfg.text_lr, cfg.text_patience, seed};
    trans.fit(tr_seqs, tr_y, va_seqs, va_y, fo);

    LIWTable liw = chi2_liw(train_tokens, train_labels, L, cfg.liw_top_k, cfg.min_freq);

    TextFeatures f;
    f.trans_probs = trans.predict(seqs, prior);
    f.liw_probs = Mat(n, L);
    for (int i = 0; i < n; ++i) {
        auto p = liw_predict(d.tokens[i], liw);
        for (int l = 0; l < L; ++l) f.liw_probs(i, l) = p[l];
    }

    Mat stacked = concat_probs(f.trans_probs, f.liw_probs);
    LogisticRegression meta(2 * L, L);
    Mat meta_x(static_cast<int>(meta_train.size()), 2 * L);
    std::vector<int> meta_y;
    for (size_t k = 0; k < meta_train.size(); ++k) {
        meta_x.row(static_cast<int>(k)) = stacked.row(meta_train[k]);
        meta_y.push_back(d.node_label[meta_train[k]]);
    }
    meta.fit(meta_x, meta_y, FitOptions{200, 0, 0.05, 0, seed});
    f.h0 = meta.predict(stacked);
    return f;
}

WeightedAdjacency const* mention_layer(const MultiplexGraph& g) {
    for (const auto& [name, adj] : g.layers)
        if (name == "mention") return &adj;
    return g.layers.empty() ? nullptr : &g.layers.front().second;
}

/// Per-node probability matrix for cfg.model on one train/test split.
Mat model_probs(const PipelineConfig& cfg, const GraphData& d, const TextFeatures& tf,
                const std::vector<int>& sub_train, const std::vector<int>& meta_train,
                const Mat* n2v_embeddings, uint64_t seed) {
    int L = d.labels.num_labels();
    std::vector<int> tr_y, va_y;
    for (int i : sub_train) tr_y.push_back(d.node_label[i]);
    for (int i : meta_train) va_y.push_back(d.node_label[i]);

    if (cfg.model == "trans_txt") return tf.h0;

    if (cfg.model == "rgcn_ext") {
        RGCNConfig rc;
        rc.widths.push_back(L);
        for (int l = 1; l < cfg.gnn_layers; ++l) rc.widths.push_back(cfg.gnn_hidden);
        rc.widths.push_back(L);
        RGCN model(d.graph, rc, seed);
        model.fit(tf.h0, sub_train, tr_y, meta_train, va_y,
                  FitOptions{cfg.gnn_epochs, 0, cfg.gnn_lr, cfg.gnn_patience, seed});
        return model.predict(tf.h0);
    }
    if (cfg.model == "graphsage_ext") {
        const WeightedAdjacency* g = mention_layer(d.graph);
        SAGEConfig sc;
        sc.widths = {L, cfg.gnn_hidden, L};
        sc.sample_sizes.assign(sc.widths.size() - 1, 0);
        for (size_t i = 0; i < sc.sample_sizes.size() && i < cfg.sage_samples.size(); ++i)
            sc.sample_sizes[i] = cfg.sage_samples[i];
        GraphSAGE model(*g, sc, seed);
        model.fit(tf.h0, sub_train, tr_y, meta_train, va_y,
                  FitOptions{cfg.gnn_epochs, 0, cfg.gnn_lr, cfg.gnn_patience, seed});
        return model.predict(tf.h0);
    }
    if (cfg.model == "n2v_ext") {
        const Mat& emb = *n2v_embeddings;
        LogisticRegression lr_graph(static_cast<int>(emb.cols()), L);
        Mat x(static_cast<int>(sub_train.size()), emb.cols());
        for (size_t k = 0; k < sub_train.size(); ++k)
            x.row(static_cast<int>(k)) = emb.row(sub_train[k]);
        lr_graph.fit(x, tr_y, FitOptions{300, 0, 0.05, 0, seed});
        Mat graph_probs = lr_graph.predict(emb);

        Mat stacked = concat_probs(graph_probs, tf.h0);
        LogisticRegression meta(2 * L, L);
        Mat mx(static_cast<int>(meta_train.size()), 2 * L);
        for (size_t k = 0; k < meta_train.size(); ++k)
            mx.row(static_cast<int>(k)) = stacked.row(meta_train[k]);
        meta.fit(mx, va_y, FitOptions{200, 0, 0.05, 0, seed});
        return meta.predict(stacked);
    }
    throw ConfigError("unknown model: " + cfg.model);
}

Mat compute_n2v_embeddings(const PipelineConfig& cfg, const GraphData& d) {
    Node2VecConfig nc = cfg.n2v;
    nc.seed = cfg.seed ^ 0x25a6ULL;
    Mat emb;
    for (const auto& [name, adj] : d.graph.layers) {
        auto walks = node2vec_walks(adj, nc);
        Mat e = skipgram_embed(walks, nc, adj.n());
        emb = emb.size() == 0 ? e : concat_probs(emb, e);
        nc.seed += 1;
    }
    return emb;
}

/// Deterministic split of `all` into sub-train (~80%) and meta-train.
std::pair<std::vector<int>, std::vector<int>> meta_split(std::vector<int> all,
                                                         uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(all);
    size_t cut = std::max<size_t>(1, all.size() * 4 / 5);
    if (cut >= all.size()) cut = all.size() - 1;
    std::vector<int> sub(all.begin(), all.begin() + cut);
    std::vector<int> meta(all.begin() + cut, all.end());
    std::sort(sub.begin(), sub.end());
    std::sort(meta.begin(), meta.end());
    return {std::move(sub), std::move(meta)};
}

}  // namespace

void stage_train(const PipelineConfig& cfg) {
    GraphData d = load_graph_data(cfg, false);
    auto [sub_train, meta_train] = meta_split(d.labeled_nodes, cfg.seed ^ 0x7121);
    TextFeatures tf = build_text_features(cfg, d, sub_train, meta_train, cfg.seed);
    Mat n2v;
    if (cfg.model == "n2v_ext") n2v = compute_n2v_embeddings(cfg, d);
    Mat probs = model_probs(cfg, d, tf, sub_train, meta_train, &n2v, cfg.seed);

    fs::create_directories(cfg.workdir + "/models");
    std::ofstream out(cfg.workdir + "/models/predictions_" + cfg.model + ".csv");
    out.precision(17);
    out << "# " << hash_comment(cfg) << "\n";
    out << "user_id,label_id,prob_top1";
    for (int l = 0; l < d.labels.num_labels(); ++l) out << ",prob_" << l;
    out << "\n";
    for (int i : d.labeled_nodes) {
        int best = 0;
        probs.row(i).maxCoeff(&best);
        out << d.node_names[i] << ',' << best << ',' << probs(i, best);
        for (int l = 0; l < d.labels.num_labels(); ++l) out << ',' << probs(i, l);
        out << '\n';
    }
}

EvalReport stage_evaluate(const PipelineConfig& cfg, bool force_hash) {
    GraphData d = load_graph_data(cfg, force_hash);
    std::unordered_map<std::string, GeoPoint> truth_points;
    for (const auto& t : d.truths) truth_points[t.user_id] = t.point;

    std::vector<int> labels_of_labeled;
    for (int i : d.labeled_nodes) labels_of_labeled.push_back(d.node_label[i]);
    std::vector<int> fold_of = stratified_folds(labels_of_labeled, cfg.folds,
                                                cfg.seed ^ 0xf01d);

    Mat n2v;
    if (cfg.model == "n2v_ext") n2v = compute_n2v_embeddings(cfg, d);

    std::vector<FoldMetrics> folds;
    std::vector<double> all_errors;
    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<int> train_nodes, test_nodes;
        for (size_t k = 0; k < d.labeled_nodes.size(); ++k) {
            if (fold_of[k] < 0) continue;
            (fold_of[k] == f ? test_nodes : train_nodes).push_back(d.labeled_nodes[k]);
        }
        if (test_nodes.empty() || train_nodes.empty())
            throw std::runtime_error("empty fold " + std::to_string(f) +
                                     "; reduce eval.k or add data");
        uint64_t fold_seed = cfg.seed * 1000003ULL + static_cast<uint64_t>(f);
        auto [sub_train, meta_train] = meta_split(train_nodes, fold_seed ^ 0x7121);
        TextFeatures tf = build_text_features(cfg, d, sub_train, meta_train, fold_seed);
        Mat probs = model_probs(cfg, d, tf, sub_train, meta_train, &n2v, fold_seed);

        std::vector<std::pair<std::string, int>> predictions;
        for (int i : test_nodes) {
            int best = 0;
            probs.row(i).maxCoeff(&best);
            predictions.emplace_back(d.node_names[i], best);
        }
        std::vector<double> errors;
        folds.push_back(evaluate(predictions, d.labels, truth_points, &errors));
        all_errors.insert(all_errors.end(), errors.begin(), errors.end());
    }
    EvalReport report = aggregate_folds(std::move(folds), std::move(all_errors));

    fs::create_directories(cfg.workdir + "/reports");
    std::ofstream jo(cfg.workdir + "/reports/eval_" + cfg.model + ".json");
    jo << report.to_json(cfg.model, cfg.hash()) << "\n";
    std::ofstream co(cfg.workdir + "/reports/error_cdf_" + cfg.model + ".csv");
    co << "# " << hash_comment(cfg) << "\n" << report.error_cdf_csv();
    std::ofstream to(cfg.workdir + "/reports/table_" + cfg.model + ".txt");
    to << report.to_table(cfg.model);
    return report;
}

}  // namespace geoloc
