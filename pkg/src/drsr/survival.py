"""Recurrent hazard model and the survival chain rule over list positions.

At position i the LSTM cell consumes the document features and emits the
conditional click probability (hazard) ``h_i`` through a logistic head. From
the hazards:

    S(i) = prod_{t<i} (1 - h_t)     probability the click lies at or after i
    W(i) = 1 - S(i)
    p_i  = h_i * S(i) = S(i) - S(i+1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, DomainError, NumericError

GATES = ("i", "f", "o", "g")
PARAM_NAMES = ("W_i", "b_i", "W_f", "b_f", "W_o", "b_o", "W_g", "b_g", "w_head", "b_head")


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class HazardModel:
    """Single-layer LSTM with a scalar hazard head.

    Gate weights ``W_*`` are (H, F + H) acting on ``[x_t, b_{t-1}]``; biases are
    (H,). The head maps the hidden state to a logit via ``w_head`` (H,) and the
    scalar ``b_head``.
    """

    W_i: np.ndarray
    b_i: np.ndarray
    W_f: np.ndarray
    b_f: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    W_g: np.ndarray
    b_g: np.ndarray
    w_head: np.ndarray
    b_head: float

    def __post_init__(self):
        H = self.w_head.shape[0]
        for g in GATES:
            W = getattr(self, f"W_{g}")
            b = getattr(self, f"b_{g}")
            if W.ndim != 2 or W.shape[0] != H or W.shape[1] <= H or b.shape != (H,):
                raise DimensionError(f"gate {g}: inconsistent parameter shapes {W.shape}, {b.shape}")
        if self.W_i.shape != self.W_f.shape or self.W_i.shape != self.W_o.shape or self.W_i.shape != self.W_g.shape:
            raise DimensionError("gate weight matrices must share one shape")
        object.__setattr__(self, "b_head", float(self.b_head))

    @property
    def hidden_dim(self) -> int:
        return self.w_head.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1] - self.hidden_dim

    def params(self) -> dict[str, np.ndarray]:
        """Parameter blocks by name; ``b_head`` as a shape-(1,) array."""
        out = {name: getattr(self, name) for name in PARAM_NAMES[:-1]}
        out["b_head"] = np.array([self.b_head])
        return out

    @classmethod
    def from_params(cls, params: dict) -> "HazardModel":
        kw = {name: np.array(params[name], dtype=np.float64) for name in PARAM_NAMES[:-1]}
        kw["b_head"] = float(np.asarray(params["b_head"]).reshape(-1)[0])
        return cls(**kw)

    def n_params(self) -> int:
        return sum(v.size for v in self.params().values())


def init_model(input_dim: int, hidden_dim: int = 32, seed: int = 0) -> HazardModel:
    """Uniform(-1/sqrt(F+H), 1/sqrt(F+H)) weights, forget bias 1, head bias 0."""
    if input_dim < 1 or hidden_dim < 1:
        raise DimensionError(f"input_dim and hidden_dim must be >= 1, got {input_dim}, {hidden_dim}")
    rng = np.random.default_rng(seed)
    F, H = input_dim, hidden_dim
    bound = 1.0 / np.sqrt(F + H)
    kw = {}
    for g in GATES:
        kw[f"W_{g}"] = rng.uniform(-bound, bound, size=(H, F + H))
        kw[f"b_{g}"] = np.zeros(H)
    kw["b_f"] = np.ones(H)
    kw["w_head"] = rng.uniform(-bound, bound, size=H)
    kw["b_head"] = 0.0
    return HazardModel(**kw)


# --------------------------------------------------------------------------
# batched recurrence (shared with the trainer)


@dataclass
class ForwardCache:
    """Intermediates of a batched pass over (B, n, F) inputs."""

    X: np.ndarray
    Z: np.ndarray       # (B, n, F+H) concatenated cell inputs
    gates: np.ndarray   # (B, n, 4H) activated i, f, o, g
    C: np.ndarray       # (B, n, H) cell states
    tanhC: np.ndarray
    B: np.ndarray       # (B, n, H) hidden states
    h: np.ndarray       # (B, n) hazards


def stacked_weights(m: HazardModel):
    W = np.concatenate([m.W_i, m.W_f, m.W_o, m.W_g], axis=0)
    b = np.concatenate([m.b_i, m.b_f, m.b_o, m.b_g])
    return W, b


def forward_batch(m: HazardModel, X: np.ndarray) -> ForwardCache:
    """Run the recurrence over a zero-padded batch of sequences.

    The cell is causal, so padding at the end never affects real positions.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != m.input_dim:
        raise DimensionError(f"expected (B, n, {m.input_dim}) input, got {X.shape}")
    nb, n, F = X.shape
    H = m.hidden_dim
    W, bias = stacked_weights(m)
    Z = np.empty((nb, n, F + H))
    gates = np.empty((nb, n, 4 * H))
    C = np.empty((nb, n, H))
    tanhC = np.empty((nb, n, H))
    Bh = np.empty((nb, n, H))
    b_prev = np.zeros((nb, H))
    c_prev = np.zeros((nb, H))
    for t in range(n):
        Z[:, t, :F] = X[:, t]
        Z[:, t, F:] = b_prev
        a = Z[:, t] @ W.T + bias
        act = gates[:, t]
        act[:, : 3 * H] = sigmoid(a[:, : 3 * H])
        act[:, 3 * H :] = np.tanh(a[:, 3 * H :])
        i, f, o, g = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        c_prev = f * c_prev + i * g
        C[:, t] = c_prev
        tanhC[:, t] = np.tanh(c_prev)
        b_prev = o * tanhC[:, t]
        Bh[:, t] = b_prev
    h = sigmoid(Bh @ m.w_head + m.b_head)
    if not np.all(np.isfinite(h)):
        bad = np.argwhere(~np.isfinite(h))[0]
        raise NumericError("non-finite hazard", int(bad[1]) + 1)
    return ForwardCache(X, Z, gates, C, tanhC, Bh, h)


def backward_batch(m: HazardModel, cache: ForwardCache, dh: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate ``dL/dh`` (B, n) through the head and the recurrence."""
    nb, n, _ = cache.X.shape
    F, H = m.input_dim, m.hidden_dim
    W, _ = stacked_weights(m)
    dlogit = dh * cache.h * (1.0 - cache.h)
    grads_head_w = np.einsum("bt,bth->h", dlogit, cache.B)
    grads_head_b = dlogit.sum()
    dW = np.zeros_like(W)
    db = np.zeros(4 * H)
    db_next = np.zeros((nb, H))
    dc_next = np.zeros((nb, H))
    for t in range(n - 1, -1, -1):
        act = cache.gates[:, t]
        i, f, o, g = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        tc = cache.tanhC[:, t]
        dB = dlogit[:, t, None] * m.w_head + db_next
        do = dB * tc
        dc = dB * o * (1.0 - tc * tc) + dc_next
        c_prev = cache.C[:, t - 1] if t > 0 else np.zeros((nb, H))
        da = np.empty((nb, 4 * H))
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = do * o * (1.0 - o)
        da[:, 3 * H :] = dc * i * (1.0 - g * g)
        dW += da.T @ cache.Z[:, t]
        db += da.sum(axis=0)
        dZ = da @ W
        db_next = dZ[:, F:]
        dc_next = dc * f
        if not np.all(np.isfinite(da)):
            raise NumericError("non-finite gradient", t + 1)
    grads = {}
    for k, gname in enumerate(GATES):
        grads[f"W_{gname}"] = dW[k * H : (k + 1) * H]
        grads[f"b_{gname}"] = db[k * H : (k + 1) * H]
    grads["w_head"] = grads_head_w
    grads["b_head"] = np.array([grads_head_b])
    return grads


# --------------------------------------------------------------------------
# survival curves


@dataclass(frozen=True, eq=False)
class HazardSequence:
    """Hazards of one list and the distributions they imply.

    ``S`` and ``W`` have n + 1 entries (positions 1..n+1); ``p`` and ``h`` have n.
    ``log_S`` is the log-space accumulator the curves were derived from.
    """

    h: np.ndarray
    S: np.ndarray
    W: np.ndarray
    p: np.ndarray
    log_S: np.ndarray
    hidden: np.ndarray | None = None

    def __len__(self):
        return self.h.shape[0]


def _curves(h):
    with np.errstate(divide="ignore"):
        log_S = np.concatenate([[0.0], np.cumsum(np.log1p(-h))])
    S = np.exp(log_S)
    return S, 1.0 - S, h * S[:-1], log_S


def survival_curves(h) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S, W, p) from a hazard sequence with entries in [0, 1]."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or np.any(~np.isfinite(h)) or np.any(h < 0) or np.any(h > 1):
        raise DomainError("hazards must be a 1-d sequence of values in [0, 1]")
    S, W, p, _ = _curves(h)
    return S, W, p


def hazard_sequence(h, hidden=None) -> HazardSequence:
    h = np.asarray(h, dtype=np.float64)
    survival_curves(h)
    S, W, p, log_S = _curves(h)
    return HazardSequence(h, S, W, p, log_S, hidden)


def forward(m: HazardModel, xs) -> HazardSequence:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise DimensionError(f"expected a (n >= 1, {m.input_dim}) feature sequence, got {xs.shape}")
    cache = forward_batch(m, xs[None])
    return hazard_sequence(cache.h[0], cache.B[0])


def score_relevance(m: HazardModel, xs) -> np.ndarray:
    """Debiased relevance estimate per displayed position: the hazard h_i."""
    return forward(m, xs).h


def rerank(scores) -> np.ndarray:
    """0-based positions sorted by descending score, ties by ascending position."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise DomainError("cannot rank non-finite scores")
    return np.argsort(-s, kind="stable")
