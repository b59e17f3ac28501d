"""Feature records, galleries and metric configuration."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyGallery,
    IndexOutOfRange,
    InvalidConfig,
    LengthMismatch,
    MixedPayloadKinds,
    NonFiniteValue,
    ZeroVector,
)

NORM_TOLERANCE = 1e-6


class Session(enum.IntEnum):
    UNSPECIFIED = 0
    ONE = 1
    TWO = 2


class PayloadKind(enum.Enum):
    REAL = "real"
    BINARY = "binary"


class BaseMetric(enum.Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"
    HAMMING = "hamming"

    @property
    def payload_kind(self):
        return PayloadKind.BINARY if self is BaseMetric.HAMMING else PayloadKind.REAL


class SamplingPolicy(enum.Enum):
    GLOBAL = "global"
    PER_PAIR = "per-pair"


class BitCode:
    """Packed bit sequence, LSB-first within each byte.

    Padding bits past ``nbits`` are forced to zero so XOR + popcount over the
    packed bytes never needs masking.
    """

    __slots__ = ("_data", "nbits")

    def __init__(self, data, nbits):
        nbits = int(nbits)
        if nbits <= 0:
            raise LengthMismatch("bit length must be positive")
        raw = bytes(data)
        if len(raw) != (nbits + 7) // 8:
            raise LengthMismatch(
                f"{len(raw)} bytes cannot hold exactly {nbits} bits"
            )
        arr = np.frombuffer(raw, dtype=np.uint8).copy()
        tail = nbits % 8
        if tail:
            arr[-1] &= (1 << tail) - 1
        self._data = arr.tobytes()
        self.nbits = nbits

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size == 0:
            raise LengthMismatch("bit length must be positive")
        return cls(np.packbits(bits != 0, bitorder="little").tobytes(), bits.size)

    @classmethod
    def from_hex(cls, text, nbits):
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise LengthMismatch(f"invalid hex bit string: {exc}") from None
        if len(raw) != (int(nbits) + 7) // 8:
            raise DimensionMismatch(
                f"hex string holds {len(raw)} bytes, {nbits} bits need {(int(nbits) + 7) // 8}"
            )
        return cls(raw, nbits)

    @property
    def data(self):
        return self._data

    def to_bits(self):
        arr = np.frombuffer(self._data, dtype=np.uint8)
        return np.unpackbits(arr, bitorder="little")[: self.nbits]

    def hex(self):
        return self._data.hex()

    def __invert__(self):
        flipped = bytes(b ^ 0xFF for b in self._data)
        return BitCode(flipped, self.nbits)

    def __eq__(self, other):
        if not isinstance(other, BitCode):
            return NotImplemented
        return self.nbits == other.nbits and self._data == other._data

    def __hash__(self):
        return hash((self.nbits, self._data))

    def __len__(self):
        return self.nbits

    def __repr__(self):
        return f"BitCode(nbits={self.nbits}, hex={self._data.hex()!r})"


@dataclass(frozen=True, eq=False)
class FeatureRecord:
    id: str
    label: object
    payload: object
    session: Session = Session.UNSPECIFIED

    def __post_init__(self):
        object.__setattr__(self, "session", Session(self.session))
        if isinstance(self.label, bool) or not isinstance(self.label, (int, str)):
            raise TypeError(f"label must be a non-negative int or a string, got {self.label!r}")
        if isinstance(self.label, int) and self.label < 0:
            raise ValueError(f"integer labels must be non-negative, got {self.label}")

    @property
    def kind(self):
        return PayloadKind.BINARY if isinstance(self.payload, BitCode) else PayloadKind.REAL

    def __eq__(self, other):
        if not isinstance(other, FeatureRecord):
            return NotImplemented
        if (self.id, self.label, self.session) != (other.id, other.label, other.session):
            return False
        if self.kind is not other.kind:
            return False
        if self.kind is PayloadKind.BINARY:
            return self.payload == other.payload
        a, b = np.asarray(self.payload), np.asarray(other.payload)
        return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()

    __hash__ = None


def unit_rows(x):
    """Float64 copy of ``x`` with every row scaled to unit L2 norm.

    The squared norm is accumulated sequentially over coordinates so the
    result for a row does not depend on how many rows are processed together.
    """
    x = np.array(x, dtype=np.float64, ndmin=2)
    acc = np.zeros(x.shape[0])
    for k in range(x.shape[1]):
        acc += x[:, k] * x[:, k]
    return x / np.sqrt(acc)[:, None]


def _normalize_payload(record_id, payload):
    vec = np.asarray(payload, dtype=np.float64).ravel()
    if vec.size == 0:
        raise DimensionMismatch(f"record {record_id!r} has an empty vector")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteValue(f"record {record_id!r} contains non-finite values")
    peak = float(np.max(np.abs(vec)))
    if peak == 0.0:
        raise ZeroVector(f"record {record_id!r} is the zero vector")
    stored = vec.astype(np.float32)
    stored_norm = math.sqrt(float(np.dot(stored.astype(np.float64), stored.astype(np.float64))))
    # already-normalized (e.g. re-ingested) vectors are kept bit-for-bit
    if abs(stored_norm - 1.0) <= NORM_TOLERANCE:
        return stored
    vec = vec / peak  # guards the squared norm against underflow and overflow
    return (vec / math.sqrt(float(np.dot(vec, vec)))).astype(np.float32)


class Gallery:
    """Immutable, indexed collection of feature records.

    Real payloads are stored as float32 unit vectors (``vectors``) with a
    float64 re-normalized copy (``unit``) used by the distance kernels.
    Binary payloads are stored packed (``codes``, one row of bytes per
    record) and as zero-padded little-endian uint64 words (``words``).
    Labels are remapped to dense integers in order of first appearance;
    ``label_names`` keeps the originals.
    """

    def __init__(self, records, kind, dim):
        self._records = tuple(records)
        self.kind = kind
        self.dim = int(dim)
        n = len(self._records)

        names = {}
        labels = np.empty(n, dtype=np.int64)
        for idx, rec in enumerate(self._records):
            labels[idx] = names.setdefault(rec.label, len(names))
        self.labels = labels
        self.label_names = tuple(names)
        self.sessions = np.array([int(r.session) for r in self._records], dtype=np.int8)
        self.ids = tuple(r.id for r in self._records)

        if kind is PayloadKind.REAL:
            self.vectors = np.stack([r.payload for r in self._records]).astype(np.float32)
            self.unit = unit_rows(self.vectors)
            self.codes = self.words = None
        else:
            nbytes = (self.dim + 7) // 8
            nwords = (nbytes + 7) // 8
            codes = np.frombuffer(b"".join(r.payload.data for r in self._records), dtype=np.uint8)
            self.codes = codes.reshape(n, nbytes)
            padded = np.zeros((n, nwords * 8), dtype=np.uint8)
            padded[:, :nbytes] = self.codes
            self.words = np.ascontiguousarray(padded.view("<u8")).astype(np.uint64)
            self.vectors = self.unit = None
        for arr in (self.labels, self.sessions, self.vectors, self.unit, self.codes, self.words):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def records(self):
        return self._records

    @property
    def dim_or_bits(self):
        return self.dim

    @property
    def class_count(self):
        return len(self.label_names)

    def __len__(self):
        return len(self._records)

    def __getitem__(self, index):
        return self._records[self.check_index(index)]

    def __iter__(self):
        return iter(self._records)

    def check_index(self, index):
        n = len(self._records)
        if isinstance(index, (bool, np.bool_)) or not isinstance(index, (int, np.integer)):
            raise IndexOutOfRange(f"index {index!r} is not an integer")
        if not 0 <= index < n:
            raise IndexOutOfRange(f"index {index} outside gallery of {n} records")
        return int(index)

    def __eq__(self, other):
        if not isinstance(other, Gallery):
            return NotImplemented
        if (self.kind, self.dim, len(self)) != (other.kind, other.dim, len(other)):
            return False
        if self.ids != other.ids or self.label_names != other.label_names:
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        if not np.array_equal(self.sessions, other.sessions):
            return False
        if self.kind is PayloadKind.REAL:
            return self.vectors.tobytes() == other.vectors.tobytes()
        return self.codes.tobytes() == other.codes.tobytes()

    __hash__ = None

    def __repr__(self):
        return (
            f"Gallery(N={len(self)}, C={self.class_count}, kind={self.kind.value}, "
            f"dim_or_bits={self.dim})"
        )


def build_gallery(records):
    """Validate and freeze ``records`` into a :class:`Gallery`.

    Raises:
        EmptyGallery: no records.
        MixedPayloadKinds: real vectors and bit codes mixed.
        DimensionMismatch: payload sizes differ.
        NonFiniteValue: a vector holds NaN or inf.
        ZeroVector: a vector cannot be normalized.
    """
    records = list(records)
    if not records:
        raise EmptyGallery("cannot build a gallery from zero records")
    kinds = {rec.kind for rec in records}
    if len(kinds) > 1:
        raise MixedPayloadKinds("records mix real vectors and bit codes")
    kind = kinds.pop()

    if kind is PayloadKind.BINARY:
        dim = records[0].payload.nbits
        for rec in records:
            if rec.payload.nbits != dim:
                raise DimensionMismatch(
                    f"record {rec.id!r} has {rec.payload.nbits} bits, expected {dim}"
                )
        return Gallery(records, kind, dim)

    built = []
    dim = None
    for rec in records:
        vec = _normalize_payload(rec.id, rec.payload)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DimensionMismatch(f"record {rec.id!r} has dimension {vec.size}, expected {dim}")
        vec.setflags(write=False)
        built.append(FeatureRecord(rec.id, rec.label, vec, rec.session))
    return Gallery(built, kind, dim)


def partition_by_identity(gallery, i):
    """Split all indices except ``i`` into same-label and different-label sets."""
    i = gallery.check_index(i)
    same = gallery.labels == gallery.labels[i]
    same[i] = False
    different = gallery.labels != gallery.labels[i]
    return frozenset(np.flatnonzero(same).tolist()), frozenset(np.flatnonzero(different).tolist())


@dataclass(frozen=True)
class MetricConfig:
    base_metric: BaseMetric = BaseMetric.COSINE
    use_rsm: bool = False
    alpha: float = 1.0
    m_refs: int = 30
    sampling_policy: SamplingPolicy = SamplingPolicy.GLOBAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_metric", BaseMetric(self.base_metric))
        object.__setattr__(self, "sampling_policy", SamplingPolicy(self.sampling_policy))
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or alpha < 0:
            raise InvalidConfig(f"alpha must be finite and >= 0, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        if isinstance(self.m_refs, bool) or int(self.m_refs) != self.m_refs or self.m_refs < 1:
            raise InvalidConfig(f"m_refs must be a positive integer, got {self.m_refs}")
        object.__setattr__(self, "m_refs", int(self.m_refs))
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "use_rsm", bool(self.use_rsm))

    @property
    def score_upper_bound(self):
        return 1.0 + self.alpha if self.use_rsm else 1.0

    def to_dict(self):
        return {
            "base_metric": self.base_metric.value,
            "use_rsm": self.use_rsm,
            "alpha": self.alpha,
            "m_refs": self.m_refs,
            "sampling_policy": self.sampling_policy.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        allowed = {"base_metric", "use_rsm", "alpha", "m_refs", "sampling_policy", "seed"}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidConfig(f"unknown metric keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(str(exc)) from None
