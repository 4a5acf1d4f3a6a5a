import json
import math

import pytest

import geoloc


def test_tokenize():
    assert geoloc.tokenize("Hola @juan http://x.co") == ["hola", "<mention>", "<url>"]
    assert geoloc.tokenize("") == []


def test_haversine():
    assert geoloc.haversine_km(0, 0, 0, 0) == 0.0
    half = geoloc.haversine_km(0, 0, 0, 180)
    assert half == pytest.approx(math.pi * geoloc.EARTH_RADIUS_KM)
    assert geoloc.ACC100_THRESHOLD_KM == pytest.approx(160.9344)


def test_chi2():
    assert geoloc.chi2_statistic([10, 0], [10, 10]) == pytest.approx(20.0)


def test_config_rejects_unknown_keys():
    with pytest.raises(geoloc.ConfigError):
        geoloc.Config('{"bogus": 1}')
    cfg = geoloc.Config('{"seed": 3}')
    assert json.loads(cfg.to_json())["seed"] == 3
    assert cfg.hash() == geoloc.Config(cfg.to_json()).hash()


def _tiny_config(workdir):
    cfg = geoloc.Config(
        json.dumps(
            {
                "synth": {
                    "n_users": 60,
                    "n_cities": 2,
                    "p_in": 0.1,
                    "tokens_per_user": 10,
                },
                "labels": {"min_users": 2},
                "text": {
                    "min_freq": 2,
                    "d": 8,
                    "heads": 2,
                    "max_len": 16,
                    "ff_hidden": 8,
                    "epochs": 2,
                },
                "model": {"name": "trans_txt"},
                "eval": {"k": 2},
                "seed": 11,
            }
        )
    )
    cfg.workdir = str(workdir)
    return cfg


def test_pipeline_end_to_end(tmp_path):
    cfg = _tiny_config(tmp_path / "work")
    geoloc.synth(cfg)
    geoloc.ingest(cfg)
    geoloc.build_graph(cfg)
    geoloc.build_labels(cfg)
    report = geoloc.evaluate(cfg)
    assert 0.0 <= report["acc_at_100"] <= 1.0
    assert report["n_evaluated"] > 0
    assert len(report["folds"]) == 2
    assert geoloc.evaluate(cfg) == report  # deterministic


def test_missing_artifact(tmp_path):
    cfg = _tiny_config(tmp_path / "work")
    with pytest.raises(geoloc.MissingArtifact):
        geoloc.evaluate(cfg)
