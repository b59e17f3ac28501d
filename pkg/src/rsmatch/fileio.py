"""Gallery file formats.

Binary embedding file (all integers little-endian)::

    header (20 bytes)
        magic        4s   b"RSMF"
        version      u16  1
        payload_kind u8   0 = real, 1 = binary
        reserved     u8   0
        dim_or_bits  u32
        count        u64
    record (repeated ``count`` times)
        id_len       u16
        id           id_len bytes, UTF-8
        label        u32
        session      u8   0 = unspecified, 1, 2
        payload      dim x float32 (real) | ceil(bits / 8) bytes, LSB-first (binary)

Labels are stored as integers: integer labels as given, string labels as
their dense index.  Trailing bytes after the last record are an error.

JSON lines: one object per line with ``id``, ``label``, optional
``session`` (1, 2, "one", "two" or null) and either ``vector`` (list of
numbers) or ``code`` (hex of the packed bytes) together with ``bits``.
"""

import json
import struct

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    DimensionMismatch,
    MalformedRecord,
    ParseError,
    RsmError,
    TruncatedFile,
    UnsupportedVersion,
)
from .model import BitCode, FeatureRecord, PayloadKind, Session, build_gallery

MAGIC = b"RSMF"
VERSION = 1
HEADER = struct.Struct("<4sHBBIQ")
_KIND_CODES = {PayloadKind.REAL: 0, PayloadKind.BINARY: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_ID_LEN = struct.Struct("<H")
_LABEL_SESSION = struct.Struct("<IB")


def _payload_size(kind, dim):
    return 4 * dim if kind is PayloadKind.REAL else (dim + 7) // 8


def encode_gallery(gallery):
    parts = [HEADER.pack(MAGIC, VERSION, _KIND_CODES[gallery.kind], 0, gallery.dim, len(gallery))]
    int_labels = all(isinstance(name, int) for name in gallery.label_names)
    for idx, rec in enumerate(gallery.records):
        rid = rec.id.encode("utf-8")
        if len(rid) > 0xFFFF:
            raise ValueError(f"record id {rec.id[:20]!r}... longer than 65535 bytes")
        label = rec.label if int_labels else int(gallery.labels[idx])
        if not 0 <= label <= 0xFFFFFFFF:
            raise ValueError(f"label {label} does not fit in 32 bits")
        parts.append(_ID_LEN.pack(len(rid)))
        parts.append(rid)
        parts.append(_LABEL_SESSION.pack(label, int(rec.session)))
        if gallery.kind is PayloadKind.REAL:
            parts.append(gallery.vectors[idx].astype("<f4").tobytes())
        else:
            parts.append(rec.payload.data)
    return b"".join(parts)


def write_embeddings(gallery, path):
    with open(path, "wb") as fh:
        fh.write(encode_gallery(gallery))


def decode_gallery(buf):
    """Parse an embedding file image; every header field is checked before
    the body is touched."""
    buf = memoryview(buf)
    if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {bytes(buf[:4])!r}")
    if len(buf) < HEADER.size:
        raise TruncatedFile(f"header needs {HEADER.size} bytes, file has {len(buf)}")
    _, version, kind_code, _, dim, count = HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise UnsupportedVersion(f"format version {version} (supported: {VERSION})")
    if kind_code not in _CODE_KINDS:
        raise UnsupportedVersion(f"unknown payload kind code {kind_code}")
    kind = _CODE_KINDS[kind_code]
    if dim == 0:
        raise DimensionMismatch("dim_or_bits must be positive")
    payload_size = _payload_size(kind, dim)
    min_record = _ID_LEN.size + _LABEL_SESSION.size + payload_size
    body = len(buf) - HEADER.size
    if count * min_record > body:
        raise TruncatedFile(f"header declares {count} records but only {body} body bytes follow")

    records = []
    pos = HEADER.size
    end = len(buf)
    for n in range(count):
        if pos + _ID_LEN.size > end:
            raise TruncatedFile(f"record {n} starts past end of file")
        (id_len,) = _ID_LEN.unpack_from(buf, pos)
        pos += _ID_LEN.size
        if pos + id_len + _LABEL_SESSION.size + payload_size > end:
            raise TruncatedFile(f"record {n} runs past end of file")
        try:
            rid = bytes(buf[pos:pos + id_len]).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRecord(f"record {n} id is not UTF-8: {exc}") from None
        pos += id_len
        label, session = _LABEL_SESSION.unpack_from(buf, pos)
        pos += _LABEL_SESSION.size
        if session not in (0, 1, 2):
            raise MalformedRecord(f"record {n} has invalid session byte {session}")
        raw = bytes(buf[pos:pos + payload_size])
        pos += payload_size
        if kind is PayloadKind.REAL:
            payload = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        else:
            payload = BitCode(raw, dim)
        records.append(FeatureRecord(rid, label, payload, Session(session)))
    if pos != end:
        raise CountMismatch(f"{end - pos} trailing bytes after {count} declared records")
    if not records:
        raise CountMismatch("file declares zero records")
    return build_gallery(records)


def read_embeddings(path):
    with open(path, "rb") as fh:
        return decode_gallery(fh.read())


_SESSIONS = {None: Session.UNSPECIFIED, 0: Session.UNSPECIFIED, 1: Session.ONE, 2: Session.TWO,
             "one": Session.ONE, "two": Session.TWO, "unspecified": Session.UNSPECIFIED}


def _parse_line(lineno, text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ParseError(lineno, "expected a JSON object")
    unknown = set(obj) - {"id", "label", "session", "vector", "code", "bits"}
    if unknown:
        raise ParseError(lineno, f"unknown keys {sorted(unknown)}")
    rid, label = obj.get("id"), obj.get("label")
    if not isinstance(rid, str):
        raise ParseError(lineno, "'id' must be a string")
    if isinstance(label, bool) or not (isinstance(label, str) or (isinstance(label, int) and label >= 0)):
        raise ParseError(lineno, "'label' must be a string or a non-negative integer")
    session = obj.get("session")
    if isinstance(session, str):
        session = session.lower()
    if isinstance(session, bool) or session not in _SESSIONS:
        raise ParseError(lineno, f"invalid session {obj.get('session')!r}")

    if ("vector" in obj) == ("code" in obj):
        raise ParseError(lineno, "exactly one of 'vector' or 'code' is required")
    if "vector" in obj:
        vec = obj["vector"]
        if not isinstance(vec, list) or not vec or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec
        ):
            raise ParseError(lineno, "'vector' must be a non-empty list of numbers")
        payload = np.asarray(vec, dtype=np.float64)
    else:
        bits, code = obj.get("bits"), obj["code"]
        if isinstance(bits, bool) or not isinstance(bits, int) or bits <= 0:
            raise ParseError(lineno, "'bits' must be a positive integer alongside 'code'")
        if not isinstance(code, str):
            raise ParseError(lineno, "'code' must be a hex string")
        try:
            payload = BitCode.from_hex(code, bits)
        except DimensionMismatch as exc:
            raise DimensionMismatch(f"line {lineno}: {exc}") from None
        except RsmError as exc:
            raise ParseError(lineno, str(exc)) from None
    return FeatureRecord(rid, label, payload, _SESSIONS[session])


def read_jsonl(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                records.append(_parse_line(lineno, line))
    return build_gallery(records)


def write_jsonl(gallery, path):
    names = {Session.UNSPECIFIED: None, Session.ONE: 1, Session.TWO: 2}
    with open(path, "w", encoding="utf-8") as fh:
        for idx, rec in enumerate(gallery.records):
            obj = {"id": rec.id, "label": rec.label, "session": names[rec.session]}
            if gallery.kind is PayloadKind.REAL:
                obj["vector"] = [float(v) for v in gallery.vectors[idx]]
            else:
                obj["bits"] = gallery.dim
                obj["code"] = rec.payload.hex()
            fh.write(json.dumps(obj) + "\n")


def write_scores(path, scores):
    """Two-column ``kind<TAB>score`` text file for a ScoreSet."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind\tscore\n")
        for kind, values in (("genuine", scores.genuine), ("impostor", scores.impostor)):
            for v in values:
                fh.write(f"{kind}\t{float(v)!r}\n")


def read_scores(path):
    from .evaluation import ScoreSet

    genuine, impostor = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "kind\tscore":
            raise ParseError(1, f"expected header 'kind<TAB>score', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or parts[0] not in ("genuine", "impostor"):
                raise ParseError(lineno, "expected 'genuine|impostor<TAB>score'")
            try:
                value = float(parts[1])
            except ValueError:
                raise ParseError(lineno, f"invalid score {parts[1]!r}") from None
            (genuine if parts[0] == "genuine" else impostor).append(value)
    return ScoreSet(np.array(genuine), np.array(impostor))
