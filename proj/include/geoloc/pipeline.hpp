#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoloc/eval.hpp"
#include "geoloc/models.hpp"
#include "geoloc/synth.hpp"

namespace geoloc {

/// Upstream artifact missing; message names the subcommand that produces it.
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    // paths
    std::string workdir = "work";
    std::string records_path;     // defaults to <workdir>/data/records.jsonl
    std::string profiles_path;    // defaults to <workdir>/data/profiles.jsonl
    std::string gazetteer_path;   // defaults to <workdir>/data/gazetteer.tsv
    std::string embeddings_path;  // optional GloVe file

    // ingest
    double r_match_km = 25.0;

    // graph
    int celebrity_threshold = 5;
    bool use_follower_layer = true;

    // labels
    std::string label_mode = "city";  // city | kdtree
    size_t min_users = 3;
    size_t min_bucket = 255;

    // text / transformer
    size_t min_freq = 5;
    size_t liw_top_k = 1000;
    TransformerConfig transformer;  // num_labels/vocab_size filled at run time
    int text_epochs = 30;
    int text_batch = 32;
    double text_lr = 1e-3;
    int text_patience = 5;

    // model
    std::string model = "rgcn_ext";  // trans_txt | rgcn_ext | graphsage_ext | n2v_ext
    int gnn_hidden = 128;
    int gnn_layers = 3;              // weight layers; widths L -> hidden.. -> L
    std::vector<int> sage_samples = {25, 10};
    int gnn_epochs = 200;
    double gnn_lr = 0.01;
    int gnn_patience = 20;
    Node2VecConfig n2v;

    // eval
    int folds = 5;

    uint64_t seed = 0;
    int threads = 1;

    SynthConfig synth;

    /// Parse a JSON config document; unknown keys are rejected by name.
    static PipelineConfig from_json_text(const std::string& text);
    static PipelineConfig from_json_file(const std::string& path);
    std::string to_json() const;
    uint64_t hash() const;  // FNV-1a over the canonical JSON dump
};

// Pipeline stages. Each writes versioned artifacts under the workdir and can
// be rerun independently; missing upstream artifacts raise MissingArtifact.
void stage_synth(const PipelineConfig& cfg);
void stage_ingest(const PipelineConfig& cfg);
void stage_build_graph(const PipelineConfig& cfg);
void stage_build_labels(const PipelineConfig& cfg);
void stage_liw(const PipelineConfig& cfg);
void stage_profile_report(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
EvalReport stage_evaluate(const PipelineConfig& cfg, bool force_hash = false);

uint64_t fnv1a64(const std::string& s);

}  // namespace geoloc
