"""Mini-batch training of the hazard model with analytic BPTT gradients."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import SessionLog, build_document_sets, reassemble_click_lists
from .errors import ConfigError, DomainError, NumericError
from .objectives import (
    LossConfig,
    Term,
    clamped_logs,
    evaluate_terms,
    item_features,
    loss_and_hazard_grad,
    objective_terms,
    pair_candidates,
    session_pairs,
    single_terms,
)
from .survival import HazardModel, backward_batch, forward, forward_batch, init_model

log = logging.getLogger(__name__)

GradientBuffer = dict  # parameter name -> array shaped like the block


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    grad_clip: float | None = 5.0
    hidden_dim: int = 32
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 0 or self.hidden_dim < 1:
            raise ConfigError("batch_size and hidden_dim must be >= 1, epochs >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigError("grad_clip must be positive or None")


# --------------------------------------------------------------------------
# gradients


def _pad(feature_lists, dim):
    n = max(len(x) for x in feature_lists)
    X = np.zeros((len(feature_lists), n, dim))
    for k, x in enumerate(feature_lists):
        X[k, : len(x)] = x
    return X


def terms_loss_and_grad(m: HazardModel, items: Sequence, terms: Sequence[Term]):
    """Weighted loss of ``terms`` over ``items`` and its parameter gradient."""
    feats = [item_features(it) for it in items]
    cache = forward_batch(m, _pad(feats, m.input_dim))
    dh = np.zeros_like(cache.h)
    logs = clamped_logs(cache.h)
    total = 0.0
    for t in terms:
        n = len(feats[t.item])
        lg = tuple(v[t.item, :n] for v in logs)
        value, g = loss_and_hazard_grad(t.kind, cache.h[t.item, :n], *t.args, lg=lg)
        total += t.weight * value
        dh[t.item, :n] += t.weight * g
    if not np.isfinite(total):
        raise NumericError("non-finite loss")
    return total, backward_batch(m, cache, dh)


def backward(m: HazardModel, item, cfg: LossConfig, kind: str | None = None):
    """(loss, gradient buffer) for one item.

    ``kind`` selects a single loss (see ``objectives.LOSS_KINDS``); without it
    the item is treated as a singleton batch of the mixed objective.
    """
    return terms_loss_and_grad(m, [item], single_terms(item, cfg, kind))


def objective_value(m: HazardModel, items: Sequence, terms: Sequence[Term]) -> float:
    """Forward-only evaluation through ``survival.forward`` and the loss functions."""
    hazards = [forward(m, item_features(it)) for it in items]
    return evaluate_terms(terms, hazards)


def central_differences(fn: Callable[[dict], float], params: dict, step: float) -> dict:
    """(fn(p + step e) - fn(p - step e)) / (2 step) for every scalar entry."""
    if not step > 0:
        raise DomainError("step must be > 0")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    grads = {}
    for name, block in params.items():
        g = np.zeros_like(block)
        flat = block.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = fn(params)
            flat[idx] = orig - step
            down = fn(params)
            flat[idx] = orig
            gflat[idx] = (up - down) / (2.0 * step)
        grads[name] = g
    return grads


def finite_diff_gradient(m: HazardModel, item, cfg: LossConfig, step: float = 1e-5, kind: str | None = None):
    terms = single_terms(item, cfg, kind)
    return central_differences(lambda p: objective_value(HazardModel.from_params(p), [item], terms), m.params(), step)


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-6) -> float:
    """Largest elementwise |a - n| / max(|a| + |n|, floor) over all blocks."""
    worst = 0.0
    for name, a in analytic.items():
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        n = np.asarray(numeric[name], dtype=np.float64).reshape(-1)
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(rel.max(initial=0.0)))
    return worst


# --------------------------------------------------------------------------
# optimisation


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def global_norm(grads: GradientBuffer) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def optimizer_step(m: HazardModel, grads: GradientBuffer, state, cfg: TrainConfig):
    """One SGD or Adam update; returns ``(new_model, new_state)``."""
    params = m.params()
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise DomainError(f"gradient block {name} has shape {g.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    if cfg.grad_clip is not None:
        norm = global_norm(grads)
        if norm > cfg.grad_clip:
            grads = {k: g * (cfg.grad_clip / norm) for k, g in grads.items()}
    lr = cfg.learning_rate
    if cfg.optimizer == "sgd":
        new = {k: params[k] - lr * grads[k] for k in params}
        return HazardModel.from_params(new), state
    state = state or AdamState()
    t = state.t + 1
    m1, m2, new = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m1[k] = cfg.beta1 * state.m.get(k, 0.0) + (1 - cfg.beta1) * g
        m2[k] = cfg.beta2 * state.v.get(k, 0.0) + (1 - cfg.beta2) * g * g
        m_hat = m1[k] / (1 - cfg.beta1**t)
        v_hat = m2[k] / (1 - cfg.beta2**t)
        new[k] = p - lr * m_hat / (np.sqrt(v_hat) + cfg.eps_opt)
    return HazardModel.from_params(new), AdamState(t, m1, m2)


def _check_trainable(sessions, loss: LossConfig):
    if not sessions:
        raise ConfigError("empty click log")
    if loss.mode == "point" and not any(s.z is not None for s in sessions):
        raise ConfigError("point mode needs at least one click record")
    if loss.mode == "pair":
        if loss.pairs_per_session == 0 or not any(
            any(pair_candidates(build_document_sets(s, loss.kappa)).values()) for s in sessions
        ):
            raise ConfigError("pair mode needs at least one valid pair")


def train(sessions: Sequence[SessionLog], cfg: TrainConfig, model: HazardModel | None = None):
    """Fit a hazard model on a click log.

    Each epoch shuffles the records, splits them into batches, evaluates the
    mixed objective (pairs are drawn afresh per batch in pair mode) and takes
    one optimizer step per batch. Returns ``(model, history)`` where history
    holds the mean batch objective of every epoch.
    """
    loss = cfg.loss
    _check_trainable(sessions, loss)
    dim = sessions[0].features.shape[1]
    units = reassemble_click_lists(sessions) if loss.mode == "click-only" else list(sessions)
    m = model if model is not None else init_model(dim, cfg.hidden_dim, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    state = None
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(units))
        total = 0.0
        n_batches = 0
        for start in range(0, len(units), cfg.batch_size):
            items = [units[k] for k in perm[start : start + cfg.batch_size]]
            if loss.mode == "pair":
                items = items + session_pairs(items, loss, rng)
            value, grads = terms_loss_and_grad(m, items, objective_terms(items, loss))
            m, state = optimizer_step(m, grads, state, cfg)
            total += value
            n_batches += 1
        history.append(total / n_batches)
        log.info("epoch %d mean loss %.6f", epoch + 1, history[-1])
    return m, history


def with_loss(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, loss=replace(cfg.loss, **kw))


def format_history(history) -> str:
    return "".join(f"{k},{float(v)!r}\n" for k, v in enumerate(history, start=1))
