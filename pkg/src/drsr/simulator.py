"""Synthetic biased click logs: initial ranker, PBM and CCM user models.

The simulators return :class:`BrowseBatch` records holding per-position
observation and click indicators; :func:`simulate_query` turns them into
truncated :class:`~drsr.data.SessionLog` records.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import LabeledQuery, RawSession, SessionLog, truncate_multiclick
from .errors import DegenerateSampleError, DomainError, ParseError

log = logging.getLogger(__name__)

CCM_PRESETS = {
    "navigational": (0.10, 0.04),
    "informational": (0.40, 0.27),
}


@dataclass(frozen=True)
class SimConfig:
    model: str = "ccm"
    tau: float = 1.0
    gamma1: float = 0.5
    gamma2: float = 0.10
    gamma3: float = 0.04
    epsilon: float = 0.1
    y_max: int = 4
    overshoot: int = 2
    max_list_len: int = 10

    def __post_init__(self):
        if self.model not in ("pbm", "ccm"):
            raise DomainError(f"unknown click model {self.model!r}")
        if self.tau < 0:
            raise DomainError("tau must be >= 0")
        for name in ("gamma1", "gamma2", "gamma3"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must be in [0, 1]")
        if not 0 <= self.epsilon < 1:
            raise DomainError("epsilon must be in [0, 1)")
        if self.y_max < 1 or self.overshoot < 0 or self.max_list_len < 1:
            raise DomainError("y_max and max_list_len must be >= 1, overshoot >= 0")

    @classmethod
    def preset(cls, name: str, **overrides) -> "SimConfig":
        """CCM configuration with the named (gamma2, gamma3) pair."""
        try:
            g2, g3 = CCM_PRESETS[name]
        except KeyError:
            raise DomainError(f"unknown CCM preset {name!r}") from None
        return cls(**{"model": "ccm", "gamma2": g2, "gamma3": g3, **overrides})


@dataclass(frozen=True, eq=False)
class InitialRanker:
    weights: np.ndarray
    bias: float = 0.0

    def scores(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features) @ self.weights + self.bias


def default_rho(n: int) -> np.ndarray:
    return 1.0 / np.arange(1, n + 1)


def load_rho(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                v = float(line)
            except ValueError:
                raise ParseError(f"bad propensity {line!r}", lineno) from None
            if not 0 <= v <= 1:
                raise ParseError(f"propensity {v} outside [0, 1]", lineno)
            values.append(v)
    return np.array(values)


def _rho_for(rho, n):
    rho = default_rho(n) if rho is None else np.asarray(rho, dtype=np.float64)
    if rho.shape[0] < n:
        raise DomainError(f"position-bias schedule covers {rho.shape[0]} positions, need {n}")
    return rho[:n]


# --------------------------------------------------------------------------
# initial ranker


def train_initial_ranker(sample: Sequence[LabeledQuery], epochs: int = 10, seed: int = 0) -> InitialRanker:
    """Linear scorer fitted by pairwise perceptron updates.

    Every (higher-label, lower-label) document pair within a query is a training
    example; a pair scored in the wrong order (or tied) adds the feature
    difference to the weights.
    """
    diffs = []
    for q in sample:
        y = q.labels
        hi, lo = np.nonzero(y[:, None] > y[None, :])
        if hi.size:
            diffs.append(q.features[hi] - q.features[lo])
    if not diffs:
        raise DegenerateSampleError("no document pair with differing labels in the ranker sample")
    diffs = np.concatenate(diffs)
    rng = np.random.default_rng(seed)
    w = np.zeros(diffs.shape[1])
    for _ in range(epochs):
        for k in rng.permutation(len(diffs)):
            d = diffs[k]
            if d @ w <= 0.0:
                w = w + d
    return InitialRanker(w, 0.0)


def rank_initial(ranker: InitialRanker, q: LabeledQuery, max_list_len: int | None = None) -> list[int]:
    """Document indices by descending score; ties keep the original index order."""
    order = np.argsort(-ranker.scores(q.features), kind="stable")
    if max_list_len is not None:
        order = order[:max_list_len]
    return [int(i) for i in order]


def sample_ranker_queries(train: Sequence[LabeledQuery], fraction: float, seed: int) -> list[LabeledQuery]:
    eligible = [q for q in train if q.n_docs >= 2]
    if not eligible:
        raise DegenerateSampleError("no training query with at least two documents")
    k = max(1, math.ceil(round(fraction * len(eligible), 9)))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(eligible), size=min(k, len(eligible)), replace=False))
    return [eligible[i] for i in idx]


# --------------------------------------------------------------------------
# click models


def relevance_probability(y, cfg: SimConfig):
    """Click probability of an observed document with grade ``y``."""
    y_arr = np.asarray(y)
    if np.any(y_arr < 0) or np.any(y_arr > cfg.y_max):
        raise DomainError(f"relevance grade outside [0, {cfg.y_max}]: {y}")
    gain = (np.power(2.0, y_arr) - 1.0) / (2.0**cfg.y_max - 1.0)
    p = cfg.epsilon + (1.0 - cfg.epsilon) * gain
    return float(p) if np.ndim(p) == 0 else p


@dataclass(frozen=True, eq=False)
class BrowseBatch:
    """Outcomes of ``n`` simulated impressions of one displayed list.

    ``observed`` and ``clicked`` are (n, list_len) booleans; ``depth`` is the last
    truly observed position (0 if none) and ``tracked`` the logged browse length.
    """

    observed: np.ndarray
    clicked: np.ndarray
    depth: np.ndarray
    tracked: np.ndarray

    def __len__(self):
        return self.observed.shape[0]


def _finish(observed, clicked, cfg, rng):
    n_sessions, n = observed.shape
    pos = np.arange(1, n + 1)
    depth = np.max(np.where(observed, pos, 0), axis=1)
    extra = rng.integers(0, cfg.overshoot + 1, size=n_sessions)
    tracked = np.minimum(depth + extra, n)
    return BrowseBatch(observed, clicked, depth, tracked)


def simulate_pbm(order, rel_probs, cfg: SimConfig, rng: np.random.Generator, n_sessions: int = 1, rho=None) -> BrowseBatch:
    """Position-based model: position i is observed with probability rho_i ** tau."""
    n = len(order)
    rel = np.asarray(rel_probs, dtype=np.float64)[:n]
    p_obs = _rho_for(rho, n) ** cfg.tau
    observed = rng.random((n_sessions, n)) < p_obs
    clicked = observed & (rng.random((n_sessions, n)) < rel)
    return _finish(observed, clicked, cfg, rng)


def simulate_ccm(order, rel_probs, cfg: SimConfig, rng: np.random.Generator, n_sessions: int = 1) -> BrowseBatch:
    """Click chain model: sequential top-down browsing with continuation gammas."""
    n = len(order)
    rel = np.asarray(rel_probs, dtype=np.float64)[:n]
    observed = np.zeros((n_sessions, n), dtype=bool)
    clicked = np.zeros((n_sessions, n), dtype=bool)
    active = np.ones(n_sessions, dtype=bool)
    for i in range(n):
        observed[:, i] = active
        c = active & (rng.random(n_sessions) < rel[i])
        clicked[:, i] = c
        p_cont = np.where(c, cfg.gamma2 * (1.0 - rel[i]) + cfg.gamma3 * rel[i], cfg.gamma1)
        active = active & (rng.random(n_sessions) < p_cont)
    return _finish(observed, clicked, cfg, rng)


def _ccm_reach(rel, cfg):
    q = np.empty(len(rel))
    reach = 1.0
    for i, r in enumerate(rel):
        q[i] = reach
        cont_click = cfg.gamma2 * (1.0 - r) + cfg.gamma3 * r
        reach = reach * ((1.0 - r) * cfg.gamma1 + r * cont_click)
    return q


def analytic_click_rate(order, rel_probs, cfg: SimConfig, rho=None) -> np.ndarray:
    """Closed-form marginal click probability at each position."""
    return analytic_observation_rate(order, rel_probs, cfg, rho) * np.asarray(rel_probs, dtype=np.float64)[: len(order)]


def analytic_observation_rate(order, rel_probs, cfg: SimConfig, rho=None) -> np.ndarray:
    n = len(order)
    if cfg.model == "pbm":
        return _rho_for(rho, n) ** cfg.tau
    return _ccm_reach(np.asarray(rel_probs, dtype=np.float64)[:n], cfg)


def simulate(order, rel_probs, cfg: SimConfig, rng, n_sessions=1, rho=None) -> BrowseBatch:
    if cfg.model == "pbm":
        return simulate_pbm(order, rel_probs, cfg, rng, n_sessions, rho)
    return simulate_ccm(order, rel_probs, cfg, rng, n_sessions)


def query_rng(seed: int, qid: str) -> np.random.Generator:
    """Independent stream per (seed, qid), so output does not depend on scheduling."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(qid.encode())])


def to_sessions(batch: BrowseBatch, q: LabeledQuery, order) -> list[SessionLog]:
    order = tuple(order)
    feats = q.features[list(order)]
    out = []
    for k in range(len(batch)):
        l = int(batch.tracked[k])
        if l == 0:
            continue
        clicks = tuple(int(z) for z in np.flatnonzero(batch.clicked[k]) + 1)
        out.extend(truncate_multiclick(RawSession(q.qid, order, feats, clicks, l)))
    return out


@dataclass
class SimulationStats:
    """Running per-position click/observation counts over raw impressions."""

    n_positions: int
    impressions: np.ndarray = None
    clicks: np.ndarray = None
    observed: np.ndarray = None
    raw_sessions: int = 0
    censored_raw: int = 0
    logs: int = 0
    censored_logs: int = 0

    def __post_init__(self):
        self.impressions = np.zeros(self.n_positions)
        self.clicks = np.zeros(self.n_positions)
        self.observed = np.zeros(self.n_positions)

    def add(self, batch: BrowseBatch, sessions: Sequence[SessionLog]):
        n = batch.observed.shape[1]
        self.impressions[:n] += len(batch)
        self.clicks[:n] += batch.clicked.sum(axis=0)
        self.observed[:n] += batch.observed.sum(axis=0)
        self.raw_sessions += len(batch)
        self.censored_raw += int(np.sum(~batch.clicked.any(axis=1)))
        self.logs += len(sessions)
        self.censored_logs += sum(1 for s in sessions if s.z is None)

    def click_rate(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.clicks / self.impressions

    def observation_rate(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.observed / self.impressions

    def summary(self) -> str:
        lines = ["position\tclick_rate\tobservation_rate"]
        for i, (c, o) in enumerate(zip(self.click_rate(), self.observation_rate()), start=1):
            lines.append(f"{i}\t{c:.4f}\t{o:.4f}")
        frac_raw = self.censored_raw / max(self.raw_sessions, 1)
        frac_logs = self.censored_logs / max(self.logs, 1)
        lines.append(f"impressions={self.raw_sessions} censored_fraction={frac_raw:.4f}")
        lines.append(f"session_logs={self.logs} censored_log_fraction={frac_logs:.4f}")
        return "\n".join(lines)


def simulate_query(q: LabeledQuery, order, cfg: SimConfig, n_sessions: int, seed: int, rho=None):
    rel = relevance_probability(q.labels[list(order)], cfg)
    batch = simulate(order, rel, cfg, query_rng(seed, q.qid), n_sessions, rho)
    return batch, to_sessions(batch, q, order)


def simulate_click_log(queries, orders, cfg: SimConfig, n_sessions: int, seed: int, rho=None):
    """Simulate every query; returns (sessions, stats) in query order."""
    stats = SimulationStats(cfg.max_list_len)
    sessions = []
    for q, order in zip(queries, orders):
        batch, logs = simulate_query(q, order, cfg, n_sessions, seed, rho)
        stats.add(batch, logs)
        sessions.extend(logs)
    return sessions, stats


# --------------------------------------------------------------------------
# click-log file


def format_click_log(sessions: Sequence[SessionLog]) -> str:
    lines = []
    for s in sessions:
        z = -1 if s.z is None else s.z
        lines.append(f"qid={s.qid}\torder={','.join(map(str, s.order))}\tz={z}\tl={s.l}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_atomic(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_click_log(path, sessions):
    write_atomic(path, format_click_log(sessions))


def parse_click_log(text: str, queries_by_qid: dict) -> list[SessionLog]:
    """Read click-log lines back into sessions, taking features from the queries."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = {}
        for part in line.split("\t"):
            key, sep, val = part.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {part!r}", lineno)
            fields[key] = val
        try:
            qid = fields["qid"]
            order = tuple(int(i) for i in fields["order"].split(",")) if fields["order"] else ()
            z = int(fields["z"])
            l = int(fields["l"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad click-log record: {exc}", lineno) from None
        q = queries_by_qid.get(qid)
        if q is None:
            raise ParseError(f"unknown qid {qid!r}", lineno)
        if any(i < 0 or i >= q.n_docs for i in order):
            raise ParseError(f"document index out of range for qid {qid!r}", lineno)
        out.append(SessionLog(qid, order, q.features[list(order)], None if z == -1 else z, l))
    return out


def read_click_log(path, queries_by_qid) -> list[SessionLog]:
    with open(path, encoding="utf-8") as fh:
        return parse_click_log(fh.read(), queries_by_qid)

