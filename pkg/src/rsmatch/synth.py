"""Seeded synthetic galleries with identity clusters and injected outliers.

Class centers are uniform on the unit sphere (normalized gaussians).  Each
sample is ``normalize(center + spread * gaussian)`` where ``spread`` is
``intra_spread`` or, with probability ``outlier_rate``, ``outlier_spread``.
The first half of a class's samples is tagged session one, the second half
session two.  Binary galleries sign-threshold the real sample (bit = 1 where
the coordinate is positive), so they are drawn in ``bits`` dimensions.

``identity_rank`` (optional) confines the class centers to a random
subspace of that dimension while the capture noise stays isotropic in the
full space.  Left unset, centers are isotropic on the whole sphere.

Draw order from the portable stream keyed ``(seed, STREAM_SYNTH)``:
the subspace basis (``dim x rank`` gaussians, orthonormalized by modified
Gram-Schmidt, only when ``identity_rank`` is set), all class centers
(class-major), then one outlier uniform per sample, then the sample noise
(sample-major).
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidSpec, SingleClass
from .model import BitCode, FeatureRecord, PayloadKind, Session, build_gallery
from .rng import STREAM_SEPARATION, STREAM_SYNTH, PortableRng
from .similarity import check_metric, pair_scores


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 100
    per_class_per_session: int = 5
    dim: int = 64
    intra_spread: float = 0.1
    outlier_rate: float = 0.0
    outlier_spread: float = 1.0
    seed: int = 0
    payload_kind: PayloadKind = PayloadKind.REAL
    bits: int = 128
    identity_rank: int = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "payload_kind", PayloadKind(self.payload_kind))
        except ValueError:
            raise InvalidSpec(f"unknown payload kind {self.payload_kind!r}") from None
        for name in ("num_classes", "per_class_per_session", "dim", "bits"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidSpec(f"{name} must be a positive integer, got {v!r}")
        for name in ("intra_spread", "outlier_spread"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise InvalidSpec(f"{name} must be a finite non-negative number, got {v!r}")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise InvalidSpec(f"outlier_rate must lie in [0, 1], got {self.outlier_rate!r}")
        if isinstance(self.seed, bool) or not 0 <= int(self.seed) < 2**64 or int(self.seed) != self.seed:
            raise InvalidSpec(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.payload_kind is PayloadKind.BINARY and self.bits < 8:
            raise InvalidSpec("binary galleries need at least 8 bits")
        rank = self.identity_rank
        if rank is not None:
            if isinstance(rank, bool) or not isinstance(rank, (int, np.integer)) or not 1 <= rank <= self.sample_dim:
                raise InvalidSpec(f"identity_rank must lie in [1, {self.sample_dim}], got {rank!r}")

    @property
    def sample_dim(self):
        return self.bits if self.payload_kind is PayloadKind.BINARY else self.dim

    def to_dict(self):
        d = asdict(self)
        d["payload_kind"] = self.payload_kind.value
        return d

    @classmethod
    def from_dict(cls, data):
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise InvalidSpec(f"unknown synth keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


def _normalize_rows(x):
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    return x / norms[:, None]


def _orthonormal_columns(a):
    q = np.array(a, dtype=np.float64)
    for k in range(q.shape[1]):
        for prev in range(k):
            q[:, k] -= np.dot(q[:, prev], q[:, k]) * q[:, prev]
        q[:, k] /= np.sqrt(np.dot(q[:, k], q[:, k]))
    return q


def generate_samples(spec):
    """Real-valued samples, labels, sessions and outlier flags for ``spec``."""
    rng = PortableRng(spec.seed, STREAM_SYNTH)
    c, per, d = spec.num_classes, spec.per_class_per_session, spec.sample_dim
    n = c * 2 * per
    if spec.identity_rank is None:
        centers = _normalize_rows(rng.normal(c * d).reshape(c, d))
    else:
        r = spec.identity_rank
        basis = _orthonormal_columns(rng.normal(d * r).reshape(d, r))
        centers = _normalize_rows(rng.normal(c * r).reshape(c, r) @ basis.T)
    outlier = rng.uniform(n) < spec.outlier_rate
    noise = rng.normal(n * d).reshape(n, d)

    labels = np.repeat(np.arange(c), 2 * per)
    sessions = np.tile(np.repeat([Session.ONE, Session.TWO], per), c)
    spread = np.where(outlier, spec.outlier_spread, spec.intra_spread)
    samples = _normalize_rows(centers[labels] + spread[:, None] * noise)
    return samples, labels, sessions, outlier


def generate_gallery(spec):
    """Build the gallery described by ``spec``; a pure function of ``spec``."""
    samples, labels, sessions, _ = generate_samples(spec)
    per = spec.per_class_per_session
    records = []
    for idx, (vec, label, session) in enumerate(zip(samples, labels, sessions)):
        within = idx % (2 * per) % per
        rid = f"c{int(label):05d}_s{int(session)}_{within:03d}"
        if spec.payload_kind is PayloadKind.BINARY:
            payload = BitCode.from_bits(vec > 0)
        else:
            payload = vec
        records.append(FeatureRecord(rid, int(label), payload, Session(int(session))))
    return build_gallery(records)


@dataclass(frozen=True)
class SeparationStats:
    mean_genuine: float
    mean_impostor: float
    overlap_estimate: float


def separation_stats(gallery, base_metric, max_pairs=20000, seed=0, bins=100):
    """Sampled genuine/impostor distance means and histogram overlap.

    The overlap is the overlap coefficient ``sum_b min(p_gen(b), p_imp(b))``
    of the two normalized histograms over ``bins`` equal bins on [0, 1]:
    0 for disjoint distributions, 1 for identical ones.
    """
    metric = check_metric(gallery, base_metric)
    if gallery.class_count < 2:
        raise SingleClass("separation needs at least two classes")
    rng = PortableRng(seed, STREAM_SEPARATION)
    labels = gallery.labels
    n = len(gallery)

    genuine_l, genuine_r = [], []
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    for members in np.split(order, bounds):
        if members.size > 1:
            iu, ju = np.triu_indices(members.size, 1)
            genuine_l.append(members[iu])
            genuine_r.append(members[ju])
    gl = np.concatenate(genuine_l) if genuine_l else np.empty(0, dtype=np.int64)
    gr = np.concatenate(genuine_r) if genuine_r else np.empty(0, dtype=np.int64)
    if gl.size > max_pairs:
        keep = np.sort(rng.raw(gl.size).argsort(kind="stable")[:max_pairs])
        gl, gr = gl[keep], gr[keep]

    # impostor pairs by rejection from uniform index draws
    il, ir = [], []
    count = 0
    while count < max_pairs:
        raw = rng.raw(2 * max_pairs).reshape(-1, 2) % np.uint64(n)
        a, b = raw[:, 0].astype(np.int64), raw[:, 1].astype(np.int64)
        ok = labels[a] != labels[b]
        il.append(a[ok])
        ir.append(b[ok])
        count += int(ok.sum())
    il = np.concatenate(il)[:max_pairs]
    ir = np.concatenate(ir)[:max_pairs]

    imp = pair_scores(il, ir, gallery, metric)
    gen = pair_scores(gl, gr, gallery, metric) if gl.size else np.empty(0)
    edges = np.linspace(0.0, 1.0, bins + 1)
    h_imp = np.histogram(imp, edges)[0] / imp.size
    if gen.size == 0:
        return SeparationStats(float("nan"), float(imp.mean()), 0.0)
    h_gen = np.histogram(gen, edges)[0] / gen.size
    return SeparationStats(float(gen.mean()), float(imp.mean()), float(np.minimum(h_gen, h_imp).sum()))
