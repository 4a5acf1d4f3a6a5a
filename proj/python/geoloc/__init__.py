from ._core import (
    ACC100_THRESHOLD_KM,
    EARTH_RADIUS_KM,
    Config,
    ConfigError,
    MissingArtifact,
    TrainingDivergence,
    build_graph,
    build_labels,
    chi2_statistic,
    evaluate,
    haversine_km,
    ingest,
    liw,
    profile_report,
    synth,
    tokenize,
    train,
)

__all__ = [
    "ACC100_THRESHOLD_KM",
    "EARTH_RADIUS_KM",
    "Config",
    "ConfigError",
    "MissingArtifact",
    "TrainingDivergence",
    "build_graph",
    "build_labels",
    "chi2_statistic",
    "evaluate",
    "haversine_km",
    "ingest",
    "liw",
    "profile_report",
    "synth",
    "tokenize",
    "train",
]
