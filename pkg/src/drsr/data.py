"""Ranking data types, LETOR ingestion, multi-click truncation and feedback sets.

Conventions used throughout the package:

* document indices (``order`` entries) are 0-based indices into a query's docs;
* list positions (``z``, ``l``, members of :class:`DocumentSets`, pair anchors)
  are 1-based, position 1 being the top of the displayed list.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, InvalidSessionError, ParseError

CENSORED = None


@dataclass(frozen=True, eq=False)
class LabeledQuery:
    """A query with its candidate documents.

    Attributes:
        qid: Query identifier.
        features: Document feature matrix, shape (n_docs, F).
        labels: Integer relevance grades, shape (n_docs,).
    """

    qid: str
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[0] < 1:
            raise DimensionError(f"query {self.qid}: features must be (n_docs >= 1, F)")
        if labels.shape != (features.shape[0],):
            raise DimensionError(f"query {self.qid}: one label per document required")
        if not np.all(np.isfinite(features)):
            raise DomainError(f"query {self.qid}: non-finite feature value")
        if labels.size and (labels.min() < 0 or not np.issubdtype(labels.dtype, np.integer)):
            raise DomainError(f"query {self.qid}: labels must be non-negative integers")
        features.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_docs(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __repr__(self):
        return f"LabeledQuery(qid={self.qid!r}, n_docs={self.n_docs}, F={self.n_features})"


@dataclass(frozen=True, eq=False)
class SessionLog:
    """One single-click (or censored) browsing record.

    ``order`` holds the displayed documents from this record's first position to
    the end of the displayed list; ``features`` is aligned with ``order``. Only the
    first ``l`` positions were tracked. ``z`` is the 1-based click position, or
    ``None`` for a censored record.
    """

    qid: str
    order: tuple
    features: np.ndarray
    z: int | None
    l: int

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        features = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "order", order)
        if features.ndim != 2 or features.shape[0] != len(order):
            raise DimensionError("session features must have one row per displayed document")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)
        if not 1 <= self.l <= len(order):
            raise InvalidSessionError(f"browse length {self.l} outside 1..{len(order)}")
        if self.z is not None and not 1 <= self.z <= self.l:
            raise InvalidSessionError(f"click position {self.z} outside 1..{self.l}")

    @property
    def omega(self) -> int:
        return 0 if self.z is None else 1

    @property
    def tracked_features(self) -> np.ndarray:
        return self.features[: self.l]

    def __repr__(self):
        return f"SessionLog(qid={self.qid!r}, n={len(self.order)}, z={self.z}, l={self.l})"


@dataclass(frozen=True, eq=False)
class RawSession:
    """A browsing record before truncation: any number of clicks."""

    qid: str
    order: tuple
    features: np.ndarray
    clicks: tuple
    l: int


@dataclass(frozen=True)
class DocumentSets:
    positive: tuple
    negative: tuple
    untrusted: tuple


# --------------------------------------------------------------------------
# SVMLight / LETOR text


def parse_svmlight(text: str | Iterable[str], n_features: int | None = None) -> list[LabeledQuery]:
    """Parse LETOR-style lines ``<label> qid:<id> <fid>:<val> ...``.

    Documents of a query must be on contiguous lines. Feature ids are 1-based
    and strictly increasing within a line; missing ids are 0.0. The feature
    dimension is the largest id seen unless ``n_features`` is given.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    groups: list[tuple[str, list, list]] = []
    seen: set[str] = set()
    max_fid = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = int(tokens[0])
        except ValueError:
            raise ParseError(f"non-integer label {tokens[0]!r}", lineno) from None
        if len(tokens) < 2 or not tokens[1].startswith("qid:") or len(tokens[1]) == 4:
            raise ParseError("expected qid:<id> after the label", lineno)
        qid = tokens[1][4:]
        feats = {}
        prev = 0
        for tok in tokens[2:]:
            fid_s, sep, val_s = tok.partition(":")
            try:
                fid = int(fid_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature {tok!r}", lineno) from None
            if not sep or fid <= prev:
                raise ParseError(f"feature ids must be strictly increasing and >= 1 ({tok!r})", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite feature value {tok!r}", lineno)
            feats[fid] = val
            prev = fid
        max_fid = max(max_fid, prev)
        if groups and groups[-1][0] == qid:
            groups[-1][1].append(feats)
            groups[-1][2].append(label)
        else:
            if qid in seen:
                raise ParseError(f"non-contiguous qid {qid!r}", lineno)
            seen.add(qid)
            groups.append((qid, [feats], [label]))

    dim = max_fid if n_features is None else n_features
    if max_fid > dim:
        raise ParseError(f"feature id {max_fid} exceeds n_features={dim}")
    queries = []
    for qid, docs, labels in groups:
        x = np.zeros((len(docs), dim))
        for row, feats in enumerate(docs):
            for fid, val in feats.items():
                x[row, fid - 1] = val
        queries.append(LabeledQuery(qid, x, np.array(labels, dtype=np.int64)))
    return queries


def serialize_svmlight(queries: Sequence[LabeledQuery]) -> str:
    """Inverse of :func:`parse_svmlight`; zero-valued features are omitted."""
    out = []
    for q in queries:
        for x, y in zip(q.features, q.labels):
            feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(x) if v != 0.0)
            out.append(f"{int(y)} qid:{q.qid} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


def load_svmlight(path, n_features=None) -> list[LabeledQuery]:
    with open(path, encoding="utf-8") as fh:
        return parse_svmlight(fh, n_features=n_features)


def _unit_hash(key: str, salt: str = "") -> float:
    return zlib.crc32(f"{salt}{key}".encode()) / 2**32


def split_queries(queries, fractions=(0.7, 0.15, 0.15)):
    """Deterministic train/validation/test split by a hash of the qid."""
    if len(fractions) != 3 or min(fractions) < 0 or not math.isclose(sum(fractions), 1.0):
        raise DomainError(f"split fractions must be three non-negatives summing to 1, got {fractions}")
    cut1, cut2 = fractions[0], fractions[0] + fractions[1]
    train, valid, test = [], [], []
    for q in queries:
        u = _unit_hash(q.qid, "split:")
        (train if u < cut1 else valid if u < cut2 else test).append(q)
    return train, valid, test


def subsample_queries(queries, fraction: float):
    """Stable nested subset: a smaller fraction is always contained in a larger one."""
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return list(queries)
    return [q for q in queries if _unit_hash(q.qid, "subset:") < fraction]


# --------------------------------------------------------------------------
# sessions


def truncate_multiclick(raw: RawSession) -> list[SessionLog]:
    """Split a multi-click record into single-click records.

    Clicks ``z_1 < ... < z_m`` yield one record per click covering
    ``(z_{k-1}, z_k]`` with the click at its last position, then one censored
    record over ``(z_m, l]`` when ``l > z_m``.
    """
    clicks = sorted(int(z) for z in raw.clicks)
    n = len(raw.order)
    if not 1 <= raw.l <= n:
        raise InvalidSessionError(f"browse length {raw.l} outside 1..{n}")
    if len(set(clicks)) != len(clicks) or (clicks and (clicks[0] < 1 or clicks[-1] > raw.l)):
        raise InvalidSessionError(f"click positions {clicks} invalid for browse length {raw.l}")
    features = np.asarray(raw.features, dtype=np.float64)
    out = []
    start = 0
    for z in clicks:
        out.append(SessionLog(raw.qid, raw.order[start:], features[start:], z - start, z - start))
        start = z
    if raw.l > start:
        out.append(SessionLog(raw.qid, raw.order[start:], features[start:], None, raw.l - start))
    return out


@dataclass(frozen=True, eq=False)
class ClickList:
    """A displayed list with its raw click labels (no browse-length information)."""

    qid: str
    order: tuple
    features: np.ndarray
    clicks: np.ndarray


def reassemble_click_lists(sessions: Sequence[SessionLog]) -> list[ClickList]:
    """Rebuild per-impression click vectors from truncated records.

    Records of one impression are consecutive and their ``order`` suffixes strictly
    shrink; a record starts a new impression when the qid changes, the previous
    record was censored, or its order is not shorter than the previous one.
    """
    out = []
    current = None
    prev = None
    for s in sessions:
        starts = (
            prev is None
            or s.qid != prev.qid
            or prev.z is None
            or len(s.order) >= len(prev.order)
        )
        if starts:
            if current is not None:
                out.append(current)
            current = ClickList(s.qid, s.order, s.features, np.zeros(len(s.order)))
        offset = len(current.order) - len(s.order)
        if current.order[offset:] != s.order:
            raise InvalidSessionError(f"record for qid {s.qid} is not a suffix of its impression")
        if s.z is not None:
            current.clicks[offset + s.z - 1] = 1.0
        prev = s
    if current is not None:
        out.append(current)
    return out


def _ceil_fraction(x: float) -> int:
    # (1 - 0.3) * 10 evaluates to 7.000000000000001
    return math.ceil(round(x, 9))


def build_document_sets(s: SessionLog, kappa: float = 0.3) -> DocumentSets:
    """Partition tracked positions into clicked, trusted-unclicked and untrusted."""
    if not 0 <= kappa < 1:
        raise DomainError(f"kappa must be in [0, 1), got {kappa}")
    if s.z is not None:
        return DocumentSets((s.z,), tuple(range(1, s.z)), tuple(range(s.z + 1, s.l + 1)))
    cut = _ceil_fraction((1 - kappa) * s.l)
    return DocumentSets((), tuple(range(1, cut + 1)), tuple(range(cut + 1, s.l + 1)))
