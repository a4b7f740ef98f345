"""Plain-text model checkpoints.

Layout::

    drsr-ckpt v1
    dims <F> <H>
    <name> <rows> <cols>
    <row of floats>
    ...

Floats use ``repr`` (shortest round-trip form), one matrix row per line.
Vectors are stored as (H, 1) columns, ``w_head`` as (1, H) and ``b_head`` as (1, 1).
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .simulator import write_atomic
from .survival import PARAM_NAMES, HazardModel

MAGIC = "drsr-ckpt v1"


def _as_matrix(name: str, block: np.ndarray) -> np.ndarray:
    if block.ndim == 2:
        return block
    if name in ("w_head", "b_head"):
        return block.reshape(1, -1)
    return block.reshape(-1, 1)


def format_checkpoint(m: HazardModel) -> str:
    lines = [MAGIC, f"dims {m.input_dim} {m.hidden_dim}"]
    for name, block in m.params().items():
        mat = _as_matrix(name, block)
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in mat)
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> HazardModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(f"not a checkpoint (expected {MAGIC!r})", 1)
    try:
        tag, f_dim, h_dim = lines[1].split()
        F, H = int(f_dim), int(h_dim)
        if tag != "dims":
            raise ValueError
    except (IndexError, ValueError):
        raise ParseError("expected 'dims <F> <H>'", 2) from None
    expected = {
        **{n: (H, F + H) for n in PARAM_NAMES if n.startswith("W_")},
        **{n: (H, 1) for n in PARAM_NAMES if n.startswith("b_") and n != "b_head"},
        "w_head": (1, H),
        "b_head": (1, 1),
    }
    blocks = {}
    k = 2
    while k < len(lines):
        if not lines[k].strip():
            k += 1
            continue
        head = lines[k].split()
        if len(head) != 3:
            raise ParseError(f"bad block header {lines[k]!r}", k + 1)
        name = head[0]
        try:
            rows, cols = int(head[1]), int(head[2])
        except ValueError:
            raise ParseError(f"bad block shape in {lines[k]!r}", k + 1) from None
        if name not in expected:
            raise ParseError(f"unknown block {name!r}", k + 1)
        if name in blocks:
            raise ParseError(f"duplicate block {name!r}", k + 1)
        if (rows, cols) != expected[name]:
            raise ParseError(f"block {name} has shape {(rows, cols)}, expected {expected[name]}", k + 1)
        body = lines[k + 1 : k + 1 + rows]
        if len(body) != rows:
            raise ParseError(f"block {name} truncated", k + 1)
        mat = np.empty((rows, cols))
        for r, row in enumerate(body):
            try:
                vals = [float(v) for v in row.split()]
            except ValueError:
                raise ParseError(f"non-numeric value in block {name}", k + 2 + r) from None
            if len(vals) != cols:
                raise ParseError(f"block {name} row has {len(vals)} values, expected {cols}", k + 2 + r)
            mat[r] = vals
        if not np.all(np.isfinite(mat)):
            raise ParseError(f"non-finite value in block {name}", k + 1)
        blocks[name] = mat
        k += 1 + rows
    missing = [n for n in PARAM_NAMES if n not in blocks]
    if missing:
        raise ParseError(f"missing blocks: {', '.join(missing)}")
    params = {n: (b if n.startswith("W_") else b.reshape(-1)) for n, b in blocks.items()}
    return HazardModel.from_params(params)


def save_checkpoint(path, m: HazardModel):
    write_atomic(path, format_checkpoint(m))


def load_checkpoint(path) -> HazardModel:
    with open(path, encoding="utf-8") as fh:
        return parse_checkpoint(fh.read())
