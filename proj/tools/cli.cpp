#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "geoloc/pipeline.hpp"

using namespace geoloc;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string workdir;
    std::string model;
    int64_t seed = -1;
    int threads = 0;
    bool force = false;
};

PipelineConfig resolve_config(const GlobalArgs& a) {
    PipelineConfig cfg = a.config_path.empty() ? PipelineConfig{}
                                               : PipelineConfig::from_json_file(a.config_path);
    if (!a.workdir.empty()) cfg.workdir = a.workdir;
    if (!a.model.empty()) cfg.model = a.model;
    if (a.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(a.seed);
        cfg.synth.seed = cfg.seed;
    }
    if (a.threads > 0) cfg.threads = a.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"user geolocation pipeline"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--workdir", g.workdir, "artifact directory (overrides config)");
    app.add_option("--seed", g.seed, "RNG seed (overrides config)");
    app.add_option("--threads", g.threads, "worker threads (overrides config)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* ingest = app.add_subcommand("ingest", "parse records and assign ground truth");
    auto* graph = app.add_subcommand("build-graph", "build the extended multiplex graph");
    auto* labels = app.add_subcommand("build-labels", "build the label space");
    auto* liw = app.add_subcommand("liw", "select location-indicative words");
    auto* profile = app.add_subcommand("profile-report",
                                       "profile-location distance error report");
    auto* train = app.add_subcommand("train", "train a model and write predictions");
    auto* eval = app.add_subcommand("evaluate", "cross-validated evaluation");
    for (auto* sc : {train, eval})
        sc->add_option("--model", g.model,
                       "trans_txt | rgcn_ext | graphsage_ext | n2v_ext");
    eval->add_flag("--force", g.force, "skip artifact config-hash checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // normalize all usage errors (CLI11 uses its own code space) to 1
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        PipelineConfig cfg = resolve_config(g);
        if (synth->parsed()) {
            stage_synth(cfg);
        } else if (ingest->parsed()) {
            stage_ingest(cfg);
        } else if (graph->parsed()) {
            stage_build_graph(cfg);
        } else if (labels->parsed()) {
            stage_build_labels(cfg);
        } else if (liw->parsed()) {
            stage_liw(cfg);
        } else if (profile->parsed()) {
            stage_profile_report(cfg);
        } else if (train->parsed()) {
            stage_train(cfg);
        } else if (eval->parsed()) {
            EvalReport r = stage_evaluate(cfg, g.force);
            std::cout << r.to_table(cfg.model);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const TrainingDivergence& e) {
        std::cerr << "error: training diverged: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
