#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geoloc/pipeline.hpp"

namespace py = pybind11;
using namespace geoloc;

namespace {

py::dict report_to_dict(const EvalReport& r) {
    py::dict d;
    d["acc_at_100"] = r.overall.acc_at_100;
    d["mean_km"] = r.overall.mean_km;
    d["median_km"] = r.overall.median_km;
    d["acc_std"] = r.acc_std;
    d["mean_std"] = r.mean_std;
    d["median_std"] = r.median_std;
    d["n_evaluated"] = r.overall.n_evaluated;
    d["n_excluded"] = r.overall.n_excluded;
    py::list folds;
    for (const auto& f : r.folds) {
        py::dict e;
        e["acc_at_100"] = f.acc_at_100;
        e["mean_km"] = f.mean_km;
        e["median_km"] = f.median_km;
        e["n"] = f.n_evaluated;
        folds.append(e);
    }
    d["folds"] = folds;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "user geolocation pipeline core";

    py::register_exception<MissingArtifact>(m, "MissingArtifact");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<TrainingDivergence>(m, "TrainingDivergence");

    py::class_<PipelineConfig>(m, "Config")
        .def(py::init([](const std::string& json_text) {
                 return PipelineConfig::from_json_text(json_text);
             }),
             py::arg("json_text") = "{}")
        .def_static("from_file", &PipelineConfig::from_json_file)
        .def("to_json", &PipelineConfig::to_json)
        .def("hash", &PipelineConfig::hash)
        .def_readwrite("workdir", &PipelineConfig::workdir)
        .def_readwrite("model", &PipelineConfig::model)
        .def_readwrite("seed", &PipelineConfig::seed);

    m.def("synth", &stage_synth);
    m.def("ingest", &stage_ingest);
    m.def("build_graph", &stage_build_graph);
    m.def("build_labels", &stage_build_labels);
    m.def("liw", &stage_liw);
    m.def("profile_report", &stage_profile_report);
    m.def("train", &stage_train);
    m.def(
        "evaluate",
        [](const PipelineConfig& cfg, bool force) {
            return report_to_dict(stage_evaluate(cfg, force));
        },
        py::arg("cfg"), py::arg("force") = false);

    m.def("haversine_km", [](double lat1, double lon1, double lat2, double lon2) {
        return haversine_km(GeoPoint{lat1, lon1}, GeoPoint{lat2, lon2});
    });
    m.def("tokenize", &tokenize);
    m.def("chi2_statistic", &chi2_statistic);
    m.attr("ACC100_THRESHOLD_KM") = kAcc100ThresholdKm;
    m.attr("EARTH_RADIUS_KM") = kEarthRadiusKm;
}
