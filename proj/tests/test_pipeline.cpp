#include <doctest.h>

#include <filesystem>

#include "geoloc/pipeline.hpp"
#include "helpers.hpp"

using namespace geoloc;
using testutil::TempDir;
using testutil::read_file;

namespace {

PipelineConfig tiny_config(const std::string& workdir, uint64_t seed = 7) {
    PipelineConfig cfg = PipelineConfig::from_json_text(R"({
      "synth": {"n_users": 90, "n_cities": 3, "p_in": 0.1, "p_out": 0.003,
                 "tokens_per_user": 16},
      "labels": {"min_users": 2},
      "text": {"min_freq": 2, "d": 12, "heads": 2, "max_len": 24, "ff_hidden": 12,
                "epochs": 3, "batch": 16},
      "model": {"name": "trans_txt", "hidden": 8, "epochs": 15,
                 "n2v": {"walk_length": 10, "walks_per_node": 3, "dim": 16, "epochs": 1}},
      "eval": {"k": 3}
    })");
    cfg.workdir = workdir;
    cfg.seed = seed;
    cfg.synth.seed = seed;
    return cfg;
}

void run_upstream(const PipelineConfig& cfg) {
    stage_synth(cfg);
    stage_ingest(cfg);
    stage_build_graph(cfg);
    stage_build_labels(cfg);
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys by name") {
    CHECK_THROWS_WITH_AS(PipelineConfig::from_json_text(R"({"sneaky": 1})"),
                         doctest::Contains("sneaky"), ConfigError);
    CHECK_THROWS_WITH_AS(PipelineConfig::from_json_text(R"({"graph": {"celeb": 2}})"),
                         doctest::Contains("graph.celeb"), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json_text("{nope"), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"model": {"name": "svm"}})"),
                    ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"labels": {"mode": "hex"}})"),
                    ConfigError);
}

TEST_CASE("config round trip preserves the hash") {
    PipelineConfig cfg = tiny_config("/tmp/x");
    PipelineConfig back = PipelineConfig::from_json_text(cfg.to_json());
    CHECK(back.hash() == cfg.hash());
    CHECK(back.model == "trans_txt");
    CHECK(back.folds == 3);

    PipelineConfig other = cfg;
    other.celebrity_threshold = 9;
    CHECK(other.hash() != cfg.hash());
}

TEST_CASE("synth output is byte-identical for a fixed seed") {
    TempDir a("synth_a"), b("synth_b");
    PipelineConfig ca = tiny_config(a.path.string());
    PipelineConfig cb = tiny_config(b.path.string());
    stage_synth(ca);
    stage_synth(cb);
    for (const char* f : {"data/records.jsonl", "data/profiles.jsonl", "data/gazetteer.tsv"})
        CHECK(read_file(a.file(f)) == read_file(b.file(f)));

    PipelineConfig cc = tiny_config(a.path.string(), 8);
    stage_synth(cc);
    CHECK(read_file(a.file("data/records.jsonl")) != read_file(b.file("data/records.jsonl")));
}

TEST_CASE("missing upstream artifacts name the producing subcommand") {
    TempDir dir("missing");
    PipelineConfig cfg = tiny_config(dir.path.string());
    CHECK_THROWS_WITH_AS(stage_build_labels(cfg), doctest::Contains("ingest"),
                         MissingArtifact);
    stage_synth(cfg);
    stage_ingest(cfg);
    CHECK_THROWS_WITH_AS(stage_evaluate(cfg), doctest::Contains("build-graph"),
                         MissingArtifact);
}

TEST_CASE("evaluate refuses artifacts from a different config unless forced") {
    TempDir dir("hash");
    PipelineConfig cfg = tiny_config(dir.path.string());
    run_upstream(cfg);
    PipelineConfig changed = cfg;
    changed.celebrity_threshold = 50;
    CHECK_THROWS_WITH_AS(stage_evaluate(changed), doctest::Contains("hash"), ConfigError);
    EvalReport forced = stage_evaluate(changed, true);
    CHECK(forced.overall.n_evaluated > 0);
}

TEST_CASE("pipeline end-to-end determinism and report artifacts") {
    TempDir dir("e2e");
    PipelineConfig cfg = tiny_config(dir.path.string());
    run_upstream(cfg);
    stage_liw(cfg);
    stage_profile_report(cfg);
    CHECK(std::filesystem::exists(dir.file("features/liw.csv")));
    CHECK(std::filesystem::exists(dir.file("reports/profile_cdf.csv")));

    EvalReport r1 = stage_evaluate(cfg);
    std::string report1 = read_file(dir.file("reports/eval_trans_txt.json"));
    EvalReport r2 = stage_evaluate(cfg);
    std::string report2 = read_file(dir.file("reports/eval_trans_txt.json"));
    CHECK(report1 == report2);  // byte-identical rerun
    CHECK(r1.overall.acc_at_100 == r2.overall.acc_at_100);
    CHECK(r1.folds.size() == 3);
    CHECK(r1.overall.n_evaluated > 0);
    // strong homophily + planted vocabulary: should be far above chance
    CHECK(r1.overall.acc_at_100 > 0.5);

    stage_train(cfg);
    std::string preds = read_file(dir.file("models/predictions_trans_txt.csv"));
    CHECK(preds.find("user_id,label_id,prob_top1") != std::string::npos);
}

TEST_CASE("graph models run on the pipeline and write their own reports") {
    TempDir dir("models_e2e");
    PipelineConfig cfg = tiny_config(dir.path.string());
    run_upstream(cfg);
    for (const std::string name : {"rgcn_ext", "graphsage_ext", "n2v_ext"}) {
        PipelineConfig m = cfg;
        m.model = name;
        EvalReport r = stage_evaluate(m);
        CHECK(r.overall.n_evaluated > 0);
        CHECK(std::filesystem::exists(dir.file("reports/eval_" + name + ".json")));
    }
}

TEST_CASE("no planted signal keeps accuracy near chance") {
    TempDir dir("null");
    PipelineConfig cfg = tiny_config(dir.path.string());
    cfg.synth.p_in = 0.01;
    cfg.synth.p_out = 0.01;
    cfg.synth.liw_strength = 0.0;  // text drawn from the shared vocabulary only
    run_upstream(cfg);
    EvalReport r = stage_evaluate(cfg);
    // 3 balanced cities: majority-class accuracy is ~1/3
    CHECK(r.overall.acc_at_100 < 0.6);
}
