"""Survival losses over hazard sequences, permutation pairs and the mixed objective.

Every loss is evaluated on clamped hazards (``HAZARD_EPS`` away from 0 and 1).
Each has a private twin returning ``(value, dL/dh)`` so the trainer can chain
into the recurrence; the public functions return the same value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ClickList, DocumentSets, SessionLog, build_document_sets
from .errors import DomainError
from .survival import HazardSequence

HAZARD_EPS = 1e-7
PROB_EPS = 1e-7

MODES = ("point", "pair", "click-only")
R1_FORMS = ("bounded", "literal")
LOSS_KINDS = (
    "point_z",
    "click",
    "nonclick",
    "l2",
    "pair_o0",
    "pair_r1_literal",
    "pair_r1_bounded",
    "pair_r2",
)


@dataclass(frozen=True)
class LossConfig:
    mode: str = "point"
    alpha: float = 0.5
    pairs_per_session: int = 4
    r1_form: str = "bounded"
    kappa: float = 0.3

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown loss mode {self.mode!r}")
        if not 0 <= self.alpha <= 1:
            raise DomainError("alpha must be in [0, 1]")
        if self.r1_form not in R1_FORMS:
            raise DomainError(f"unknown r1 form {self.r1_form!r}")
        if self.pairs_per_session < 0 or not 0 <= self.kappa < 1:
            raise DomainError("pairs_per_session must be >= 0 and kappa in [0, 1)")


@dataclass(frozen=True, eq=False)
class PairInstance:
    """A permuted view of one session anchored at positions ``a < b``.

    ``o0`` keeps the displayed order; ``r1`` and ``r2`` swap the documents at
    ``a`` and ``b``. Anchors index positions of the permuted sequence.
    """

    kind: str
    base: SessionLog
    a: int
    b: int
    permuted_features: np.ndarray

    def __post_init__(self):
        if self.kind not in ("o0", "r1", "r2"):
            raise DomainError(f"unknown pair kind {self.kind!r}")
        if not 1 <= self.a < self.b <= self.base.l:
            raise DomainError(f"pair anchors ({self.a}, {self.b}) invalid for l={self.base.l}")


# --------------------------------------------------------------------------
# losses on hazards


def _hazards(hs) -> np.ndarray:
    return hs.h if isinstance(hs, HazardSequence) else np.asarray(hs, dtype=np.float64)


def clamped_logs(h):
    """log h, log(1 - h) on clamped hazards and their derivatives (zero on the clamp)."""
    hc = np.clip(h, HAZARD_EPS, 1.0 - HAZARD_EPS)
    live = (h > HAZARD_EPS) & (h < 1.0 - HAZARD_EPS)
    log_h = np.log(hc)
    log_1mh = np.log1p(-hc)
    d_log_h = np.where(live, 1.0 / hc, 0.0)
    d_log_1mh = np.where(live, -1.0 / (1.0 - hc), 0.0)
    return log_h, log_1mh, d_log_h, d_log_1mh


def _check_pos(name, v, n):
    if not 1 <= v <= n:
        raise DomainError(f"{name}={v} outside 1..{n}")


def _check_pair(a, b, n):
    if not 1 <= a < b <= n:
        raise DomainError(f"pair anchors need 1 <= a < b <= n, got a={a}, b={b}, n={n}")


def _neg_log_complement(log_p, d_log_p):
    """-log(1 - exp(log_p)) and its gradient; the complement is floored at PROB_EPS."""
    q = -np.expm1(log_p)
    if q <= PROB_EPS:
        return -np.log(PROB_EPS), np.zeros_like(d_log_p)
    return -np.log(q), (np.exp(log_p) / q) * d_log_p


def _point_z(h, z, lg=None):
    n = len(h)
    _check_pos("z", z, n)
    lh, l1, dlh, dl1 = lg or clamped_logs(h)
    g = np.zeros(n)
    g[: z - 1] = -dl1[: z - 1]
    g[z - 1] = -dlh[z - 1]
    return -(lh[z - 1] + l1[: z - 1].sum()), g


def _click(h, l, lg=None):
    n = len(h)
    _check_pos("l", l, n)
    _, l1, _, dl1 = lg or clamped_logs(h)
    d_log_s = np.zeros(n)
    d_log_s[: l - 1] = dl1[: l - 1]
    return _neg_log_complement(l1[: l - 1].sum(), d_log_s)


def _nonclick(h, l, lg=None):
    n = len(h)
    _check_pos("l", l, n)
    _, l1, _, dl1 = lg or clamped_logs(h)
    g = np.zeros(n)
    g[: l - 1] = -dl1[: l - 1]
    return -l1[: l - 1].sum(), g


def _l2(h, l, omega, lg=None):
    if omega not in (0, 1):
        raise DomainError(f"click indicator must be 0 or 1, got {omega}")
    return _click(h, l, lg) if omega == 1 else _nonclick(h, l, lg)


def _cond_click_log(h, a, b, lg=None):
    """log P(z = b | z >= a) and its gradient."""
    n = len(h)
    _check_pair(a, b, n)
    lh, l1, dlh, dl1 = lg or clamped_logs(h)
    g = np.zeros(n)
    g[a - 1 : b - 1] = dl1[a - 1 : b - 1]
    g[b - 1] = dlh[b - 1]
    return lh[b - 1] + l1[a - 1 : b - 1].sum(), g


def _pair_o0(h, i, j, lg=None):
    v, g = _cond_click_log(h, i, j, lg)
    return -v, -g


def _pair_r1(h, a, b, form="bounded", lg=None):
    log_p, g = _cond_click_log(h, a, b, lg)
    if form == "literal":
        return log_p, g
    if form != "bounded":
        raise DomainError(f"unknown r1 form {form!r}")
    return _neg_log_complement(log_p, g)


def _pair_r2(h, a, b, lg=None):
    n = len(h)
    _check_pair(a, b, n)
    _, l1, _, dl1 = lg or clamped_logs(h)
    g = np.zeros(n)
    g[a - 1 : b - 1] = -dl1[a - 1 : b - 1]
    return -l1[a - 1 : b - 1].sum(), g


def _click_bce(h, clicks, lg=None):
    clicks = np.asarray(clicks, dtype=np.float64)
    if clicks.shape != h.shape:
        raise DomainError("one click label per position required")
    lh, l1, dlh, dl1 = lg or clamped_logs(h)
    value = -(clicks * lh + (1.0 - clicks) * l1).sum()
    return value, -(clicks * dlh + (1.0 - clicks) * dl1)


_KIND_FUNCS = {
    "point_z": _point_z,
    "click": _click,
    "nonclick": _nonclick,
    "l2": _l2,
    "pair_o0": _pair_o0,
    "pair_r1_literal": lambda h, a, b, lg=None: _pair_r1(h, a, b, "literal", lg),
    "pair_r1_bounded": lambda h, a, b, lg=None: _pair_r1(h, a, b, "bounded", lg),
    "pair_r2": _pair_r2,
    "click_bce": _click_bce,
}


def loss_and_hazard_grad(kind: str, h, *args, lg=None) -> tuple[float, np.ndarray]:
    """Loss ``kind`` at hazards ``h`` and its gradient with respect to ``h``.

    ``lg`` optionally carries the clamped logs of ``h`` (see :func:`clamped_logs`).
    """
    try:
        fn = _KIND_FUNCS[kind]
    except KeyError:
        raise DomainError(f"unknown loss kind {kind!r}") from None
    value, grad = fn(np.asarray(h, dtype=np.float64), *args, lg=lg)
    return float(value), grad


def loss_point_z(hs, z: int) -> float:
    """Negative log click probability at the clicked position."""
    return loss_and_hazard_grad("point_z", _hazards(hs), z)[0]


def loss_click(hs, l: int) -> float:
    """-log W(l): the click happened before the browse length."""
    return loss_and_hazard_grad("click", _hazards(hs), l)[0]


def loss_nonclick(hs, l: int) -> float:
    """-log S(l): survival up to the browse length of a censored record."""
    return loss_and_hazard_grad("nonclick", _hazards(hs), l)[0]


def loss_l2(hs, l: int, omega: int) -> float:
    """Cross entropy of the click status at the browse length."""
    return loss_and_hazard_grad("l2", _hazards(hs), l, omega)[0]


def loss_pair_o0(hs, i: int, j: int) -> float:
    return loss_and_hazard_grad("pair_o0", _hazards(hs), i, j)[0]


def loss_pair_r1(hs, a: int, b: int, form: str = "bounded") -> float:
    """Penalty on a click at ``b`` given survival to ``a`` (swapped order).

    ``literal`` returns +log P(z=b | z>=a), which is unbounded below; ``bounded``
    returns -log(1 - P(z=b | z>=a)).
    """
    return float(_pair_r1(_hazards(hs), a, b, form)[0])


def loss_pair_r2(hs, a: int, b: int) -> float:
    """-log S(b)/S(a): continuing to browse from ``a`` to ``b``."""
    return loss_and_hazard_grad("pair_r2", _hazards(hs), a, b)[0]


def loss_click_bce(hs, clicks) -> float:
    """Per-position logistic loss on raw click labels (no survival structure)."""
    return loss_and_hazard_grad("click_bce", _hazards(hs), clicks)[0]


# --------------------------------------------------------------------------
# pairs


def _swap(x, a, b):
    y = np.array(x, dtype=np.float64)
    y[[a - 1, b - 1]] = y[[b - 1, a - 1]]
    return y


def pair_candidates(sets: DocumentSets) -> dict[str, list[tuple[int, int]]]:
    clicked = [(i, j) for j in sets.positive for i in sets.negative if i < j]
    untrusted = [(i, k) for i in sets.negative for k in sets.untrusted if i < k]
    return {"o0": clicked, "r1": list(clicked), "r2": untrusted}


def sample_pairs(sets: DocumentSets, s: SessionLog, cfg: LossConfig, rng: np.random.Generator) -> list[PairInstance]:
    """Up to ``cfg.pairs_per_session`` pairs of each kind, uniformly without replacement."""
    out = []
    for kind, cands in pair_candidates(sets).items():
        if not cands or cfg.pairs_per_session == 0:
            continue
        k = min(cfg.pairs_per_session, len(cands))
        picks = np.sort(rng.choice(len(cands), size=k, replace=False))
        for idx in picks:
            a, b = cands[idx]
            x = s.features if kind == "o0" else _swap(s.features, a, b)
            out.append(PairInstance(kind, s, a, b, x))
    return out


def session_pairs(sessions: Sequence[SessionLog], cfg: LossConfig, rng) -> list[PairInstance]:
    out = []
    for s in sessions:
        out.extend(sample_pairs(build_document_sets(s, cfg.kappa), s, cfg, rng))
    return out


# --------------------------------------------------------------------------
# objective assembly


@dataclass(frozen=True)
class Term:
    """One weighted loss evaluation: ``weight * loss(kind)(h[item], *args)``."""

    item: int
    kind: str
    args: tuple
    weight: float


def item_features(item) -> np.ndarray:
    """Feature sequence a term is evaluated on, cut to the last position it can reference."""
    if isinstance(item, PairInstance):
        return item.permuted_features[: item.b]
    if isinstance(item, SessionLog):
        return item.features[: item.l]
    if isinstance(item, ClickList):
        return item.features
    raise TypeError(f"unsupported batch item {type(item).__name__}")


def r1_kind(cfg: LossConfig) -> str:
    return f"pair_r1_{cfg.r1_form}"


def objective_terms(items: Sequence, cfg: LossConfig) -> list[Term]:
    """Decompose the mixed objective over a batch into weighted terms.

    The loss families are averaged separately and mixed as
    ``alpha * L1 + (1 - alpha) * L2``. L1 is the click-position loss over
    click records (point mode) or the sum of the per-kind pair means (pair
    mode); L2 is the click-status loss over every session record. In
    click-only mode the objective is the mean per-list click cross entropy.
    """
    if not items:
        raise DomainError("empty batch")
    sessions = [(k, it) for k, it in enumerate(items) if isinstance(it, SessionLog)]
    pairs = [(k, it) for k, it in enumerate(items) if isinstance(it, PairInstance)]
    lists = [(k, it) for k, it in enumerate(items) if isinstance(it, ClickList)]
    terms = []
    if cfg.mode == "click-only":
        if sessions or pairs:
            raise DomainError("click-only batches hold ClickList items only")
        return [Term(k, "click_bce", (it.clicks,), 1.0 / len(lists)) for k, it in lists]
    if lists:
        raise DomainError("ClickList items are only valid in click-only mode")
    alpha = cfg.alpha
    if cfg.mode == "point":
        clicked = [(k, s) for k, s in sessions if s.z is not None]
        for k, s in clicked:
            terms.append(Term(k, "point_z", (s.z,), alpha / len(clicked)))
    else:
        kinds = {"o0": "pair_o0", "r1": r1_kind(cfg), "r2": "pair_r2"}
        for pk, loss_kind in kinds.items():
            group = [(k, p) for k, p in pairs if p.kind == pk]
            for k, p in group:
                terms.append(Term(k, loss_kind, (p.a, p.b), alpha / len(group)))
    for k, s in sessions:
        terms.append(Term(k, "l2", (s.l, s.omega), (1.0 - alpha) / len(sessions)))
    return terms


def evaluate_terms(terms: Sequence[Term], hazards: Sequence) -> float:
    # fixed summation order for reproducibility
    total = 0.0
    for t in terms:
        total += t.weight * loss_and_hazard_grad(t.kind, _hazards(hazards[t.item]), *t.args)[0]
    return total


def combined_objective(batch: Sequence[tuple], cfg: LossConfig) -> float:
    """Mixed objective over ``(HazardSequence, item)`` pairs.

    Items are :class:`SessionLog` (and, in pair mode, :class:`PairInstance`
    whose hazards were computed on the permuted sequence).
    """
    if not batch:
        raise DomainError("empty batch")
    hazards = [hs for hs, _ in batch]
    items = [it for _, it in batch]
    return evaluate_terms(objective_terms(items, cfg), hazards)


def single_terms(item, cfg: LossConfig, kind: str | None = None) -> list[Term]:
    """Terms for one item: a named loss kind, or the mixed objective on a singleton batch."""
    if kind is None:
        return objective_terms([item], cfg)
    if kind in ("pair_o0", "pair_r1_literal", "pair_r1_bounded", "pair_r2"):
        if not isinstance(item, PairInstance):
            raise DomainError(f"{kind} needs a PairInstance")
        return [Term(0, kind, (item.a, item.b), 1.0)]
    if kind == "click_bce":
        return [Term(0, kind, (item.clicks,), 1.0)]
    if not isinstance(item, SessionLog):
        raise DomainError(f"{kind} needs a SessionLog")
    if kind == "point_z":
        if item.z is None:
            raise DomainError("point_z needs a click record")
        return [Term(0, kind, (item.z,), 1.0)]
    if kind == "l2":
        return [Term(0, kind, (item.l, item.omega), 1.0)]
    if kind in ("click", "nonclick"):
        return [Term(0, kind, (item.l,), 1.0)]
    raise DomainError(f"unknown loss kind {kind!r}")
