"""Finite-difference verification of the analytic gradients, per loss kind."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SessionLog
from .objectives import LOSS_KINDS, LossConfig, PairInstance, _swap
from .survival import HazardModel, PARAM_NAMES
from .trainer import backward, finite_diff_gradient, max_relative_error

PAIR_KIND = {"pair_o0": "o0", "pair_r1_literal": "r1", "pair_r1_bounded": "r1", "pair_r2": "r2"}


def random_model(F: int, H: int, rng: np.random.Generator, scale: float = 0.5) -> HazardModel:
    params = {}
    for name in PARAM_NAMES:
        if name.startswith("W_"):
            params[name] = rng.normal(0.0, scale, size=(H, F + H))
        elif name == "b_head":
            params[name] = rng.normal(0.0, scale, size=1)
        else:
            params[name] = rng.normal(0.0, scale, size=H)
    return HazardModel.from_params(params)


def random_item(kind: str, F: int, n: int, rng: np.random.Generator):
    """A valid item for ``kind`` over ``n`` positions with random features."""
    x = rng.normal(size=(n, F))
    order = tuple(range(n))
    if kind in PAIR_KIND:
        a, b = sorted(rng.choice(np.arange(1, n + 1), size=2, replace=False))
        base = SessionLog("g", order, x, int(b), n)
        pk = PAIR_KIND[kind]
        feats = x if pk == "o0" else _swap(x, a, b)
        return PairInstance(pk, base, int(a), int(b), feats)
    l = int(rng.integers(2, n + 1))
    clicked = kind in ("point_z", "click") or (kind == "l2" and rng.random() < 0.5)
    z = int(rng.integers(1, l + 1)) if clicked else None
    return SessionLog("g", order, x, z, l)


@dataclass(frozen=True)
class KindResult:
    kind: str
    max_rel_error: float
    draws: int
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tol


def check_kind(kind: str, draws: int = 20, seed: int = 0, step: float = 1e-5, tol: float = 1e-4,
               F: int = 3, H: int = 4, n: int = 5) -> KindResult:
    rng = np.random.default_rng([seed, LOSS_KINDS.index(kind)])
    cfg = LossConfig()
    worst = 0.0
    for _ in range(draws):
        m = random_model(F, H, rng)
        item = random_item(kind, F, n, rng)
        _, analytic = backward(m, item, cfg, kind=kind)
        numeric = finite_diff_gradient(m, item, cfg, step=step, kind=kind)
        worst = max(worst, max_relative_error(analytic, numeric))
    return KindResult(kind, worst, draws, tol)


def run_gradcheck(draws: int = 20, seed: int = 0, step: float = 1e-5, tol: float = 1e-4) -> list[KindResult]:
    return [check_kind(k, draws, seed, step, tol) for k in LOSS_KINDS]


def format_report(results) -> str:
    lines = ["kind\tmax_rel_error\tdraws\tstatus"]
    for r in results:
        lines.append(f"{r.kind}\t{r.max_rel_error:.3e}\t{r.draws}\t{'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
