import json

import pytest

from rsmatch.config import EVAL_DEFAULTS, RunConfig, load_config
from rsmatch.errors import InvalidConfig
from rsmatch.evaluation import ProtocolKind
from rsmatch.model import BaseMetric


def test_defaults():
    cfg = RunConfig()
    assert cfg.eval == EVAL_DEFAULTS
    assert cfg.protocol.kind is ProtocolKind.CROSS_SESSION
    assert not cfg.baseline.use_rsm and cfg.candidate.use_rsm


def test_round_trip():
    cfg = RunConfig.from_dict({
        "input": "g.rsmf", "out": "res", "protocol": "all-pairs",
        "baseline": {"base_metric": "hamming"},
        "candidate": {"base_metric": "hamming", "use_rsm": True, "m_refs": 12},
        "synth": {"num_classes": 5, "payload_kind": "binary", "bits": 64},
        "eval": {"workers": 3},
    })
    assert cfg.candidate.m_refs == 12 and cfg.baseline.base_metric is BaseMetric.HAMMING
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "data",
    [
        {"inputs": "x"},
        {"eval": {"worker": 2}},
        {"eval": {"workers": 0}},
        {"eval": {"mode": "fast"}},
        {"eval": {"hist_width": 0}},
        {"eval": {"max_listed_trouble": -1}},
        {"protocol": "sideways"},
        {"baseline": []},
        {"synth": {"num_classes": 0}},
        {"synth": {"colour": "blue"}},
        {"input": 5},
        [],
    ],
)
def test_rejects_bad_configs(data):
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict(data)


def test_overrides_merge_eval_and_skip_none():
    cfg = RunConfig.from_dict({"eval": {"workers": 4, "roc_resolution": 50}})
    new = cfg.with_overrides(out="o", input=None, eval={"workers": 2})
    assert new.eval["workers"] == 2 and new.eval["roc_resolution"] == 50
    assert new.out == "o" and new.input is None


def test_provenance_ignores_workers_and_out():
    a = RunConfig(out="first", eval={"workers": 1})
    b = RunConfig(out="second", eval={"workers": 4})
    assert a.to_dict() != b.to_dict()
    assert a.to_dict(provenance=True) == b.to_dict(provenance=True)
    assert "out" not in a.to_dict(provenance=True)
    assert "chunk_size" not in a.to_dict(provenance=True)["eval"]
    assert "roc_resolution" in a.to_dict(provenance=True)["eval"]


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"protocol": "all-pairs"}))
    assert load_config(path).protocol.kind is ProtocolKind.ALL_PAIRS
    path.write_text("{not json")
    with pytest.raises(InvalidConfig, match="line 1"):
        load_config(path)
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "missing.json")
