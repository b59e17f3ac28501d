"""Run configuration files.

A run config is a JSON object; every section is optional and unknown keys
are rejected at every level::

    {
      "input": "gallery.rsmf",
      "out": "results/",
      "protocol": "cross-session",
      "baseline":  {"base_metric": "hamming"},
      "candidate": {"base_metric": "hamming", "use_rsm": true, "m_refs": 30},
      "synth": {"num_classes": 600, "per_class_per_session": 10, ...},
      "eval": {"mode": "auto", "workers": 1, "chunk_size": 1048576,
               "roc_resolution": 100, "hist_width": 0.01, "max_listed_trouble": 100}
    }

Command-line flags override values read from the file.
"""

import json
from dataclasses import dataclass, field, replace

from .errors import InvalidConfig, InvalidSpec
from .evaluation import DEFAULT_CHUNK, PairProtocol, ProtocolKind
from .model import MetricConfig
from .synth import SynthSpec

EVAL_DEFAULTS = {
    "mode": "auto",
    "workers": 1,
    "chunk_size": DEFAULT_CHUNK,
    "roc_resolution": 100,
    "hist_width": 0.01,
    "max_listed_trouble": 100,
}
# options that change how a run executes but never what it produces
EXECUTION_ONLY = ("workers", "chunk_size")
LOCATION_ONLY = ("out",)

_TOP_KEYS = ("input", "out", "protocol", "baseline", "candidate", "synth", "eval")


def _check_eval(opts):
    unknown = set(opts) - set(EVAL_DEFAULTS)
    if unknown:
        raise InvalidConfig(f"unknown eval keys: {sorted(unknown)}")
    merged = {**EVAL_DEFAULTS, **opts}
    if merged["mode"] not in ("auto", "exact", "streamed"):
        raise InvalidConfig(f"eval.mode must be auto, exact or streamed, got {merged['mode']!r}")
    for name in ("workers", "chunk_size", "roc_resolution"):
        v = merged[name]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise InvalidConfig(f"eval.{name} must be a positive integer, got {v!r}")
    v = merged["max_listed_trouble"]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise InvalidConfig(f"eval.max_listed_trouble must be a non-negative integer, got {v!r}")
    v = merged["hist_width"]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v <= 1:
        raise InvalidConfig(f"eval.hist_width must lie in (0, 1], got {v!r}")
    return merged


@dataclass(frozen=True)
class RunConfig:
    input: str = None
    out: str = None
    protocol: PairProtocol = field(default_factory=PairProtocol.cross_session)
    baseline: MetricConfig = field(default_factory=MetricConfig)
    candidate: MetricConfig = field(default_factory=lambda: MetricConfig(use_rsm=True))
    synth: SynthSpec = field(default_factory=SynthSpec)
    eval: dict = field(default_factory=lambda: dict(EVAL_DEFAULTS))

    def __post_init__(self):
        object.__setattr__(self, "eval", _check_eval(dict(self.eval)))

    def with_overrides(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        if "eval" in changes:
            changes["eval"] = {**self.eval, **changes["eval"]}
        return replace(self, **changes)

    def to_dict(self, provenance=False):
        """Plain-data form.  ``provenance`` drops the execution-only eval options
        and the output directory so the copy embedded in reports depends only on what
        determines the results."""
        ev = dict(self.eval)
        if provenance:
            for key in EXECUTION_ONLY:
                ev.pop(key, None)
        data = {
            "input": self.input,
            "out": self.out,
            "protocol": self.protocol.kind.value,
            "baseline": self.baseline.to_dict(),
            "candidate": self.candidate.to_dict(),
            "synth": self.synth.to_dict(),
            "eval": ev,
        }
        if provenance:
            for key in LOCATION_ONLY:
                del data[key]
        return data

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfig("run config must be a JSON object")
        unknown = set(data) - set(_TOP_KEYS)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key in ("input", "out"):
            if data.get(key) is not None:
                if not isinstance(data[key], str):
                    raise InvalidConfig(f"{key} must be a path string")
                kwargs[key] = data[key]
        if "protocol" in data:
            try:
                kwargs["protocol"] = PairProtocol(ProtocolKind(data["protocol"]))
            except ValueError:
                raise InvalidConfig(f"unknown protocol {data['protocol']!r}") from None
        for key in ("baseline", "candidate"):
            if key in data:
                if not isinstance(data[key], dict):
                    raise InvalidConfig(f"{key} must be an object")
                kwargs[key] = MetricConfig.from_dict(data[key])
        if "synth" in data:
            if not isinstance(data["synth"], dict):
                raise InvalidConfig("synth must be an object")
            try:
                kwargs["synth"] = SynthSpec.from_dict(data["synth"])
            except InvalidSpec as exc:
                raise InvalidConfig(f"synth: {exc}") from None
        if "eval" in data:
            if not isinstance(data["eval"], dict):
                raise InvalidConfig("eval must be an object")
            kwargs["eval"] = data["eval"]
        return cls(**kwargs)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON at line {exc.lineno} ({exc.msg})") from None
    except OSError as exc:
        raise InvalidConfig(f"cannot read {path}: {exc.strerror}") from None
    return RunConfig.from_dict(data)
