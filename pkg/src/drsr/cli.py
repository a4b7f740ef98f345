"""Command-line entry point: ``drsr <simulate|train|eval|sweep|curve|gradcheck>``.

Outputs (under ``--out``):

- ``clicks.tsv``, ``ranker.txt``, ``sim_summary.txt``  from ``simulate``
- ``model-<mode>.ckpt``, ``history-<mode>.csv``       from ``train``
- ``metrics-<label>.csv``                             from ``eval``
- ``sweep.csv``                                       from ``sweep``
- ``curve.csv``, ``curve_summary.csv``                from ``curve``
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import experiments as ex
from .checkpoint import load_checkpoint, save_checkpoint
from .config import METHODS, ExperimentConfig, read_config
from .errors import ConfigError, DRSRError
from .evaluation import curve_distance, format_metric_rows, label_scorer
from .gradcheck import format_report, run_gradcheck
from .simulator import read_click_log, write_atomic, write_click_log
from .trainer import format_history

METRICS_HEADER = "run,metric,k,value\n"
CURVE_HEADER = "position,mean_reranked_position,series\n"


def _path(cfg: ExperimentConfig, name: str) -> str:
    return os.path.join(cfg["run.out"], name)


def checkpoint_path(cfg: ExperimentConfig, mode: str) -> str:
    return _path(cfg, f"model-{mode}.ckpt")


def cmd_simulate(cfg: ExperimentConfig) -> int:
    prep = ex.prepare(cfg)
    sessions, stats = ex.simulate_logs(cfg, prep)
    write_click_log(_path(cfg, "clicks.tsv"), sessions)
    r = prep.ranker
    write_atomic(
        _path(cfg, "ranker.txt"),
        f"bias {float(r.bias)!r}\nweights {' '.join(repr(float(w)) for w in r.weights)}\n",
    )
    summary = stats.summary() + "\n"
    write_atomic(_path(cfg, "sim_summary.txt"), summary)
    sys.stdout.write(summary)
    return 0


def _load_sessions(cfg: ExperimentConfig, prep: ex.Prepared):
    path = _path(cfg, "clicks.tsv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"click log {path} not found; run 'simulate' first")
    return read_click_log(path, prep.queries_by_qid)


def cmd_train(cfg: ExperimentConfig) -> int:
    mode = cfg["train.mode"]
    prep = ex.prepare(cfg)
    sessions = _load_sessions(cfg, prep)
    model, history = ex.train_method(cfg, sessions, mode)
    save_checkpoint(checkpoint_path(cfg, mode), model)
    write_atomic(_path(cfg, f"history-{mode}.csv"), "epoch,mean_loss\n" + format_history(history))
    if history:
        sys.stdout.write(f"{mode}: {len(history)} epochs, loss {history[0]:.6f} -> {history[-1]:.6f}\n")
    return 0


def _load_model(cfg: ExperimentConfig, path: str, n_features: int):
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint {path} not found")
    m = load_checkpoint(path)
    if m.input_dim != n_features:
        raise ConfigError(f"checkpoint {path} expects {m.input_dim} features, dataset has {n_features}")
    return m


def cmd_eval(cfg: ExperimentConfig) -> int:
    prep = ex.prepare(cfg)
    ks = cfg["eval.ks"]
    if cfg["eval.scorer"] == "oracle":
        run = "oracle"
        report = ex.evaluate(label_scorer, prep, ks)
    else:
        mode = cfg["train.mode"]
        run = cfg["run.label"] if "run.label" in cfg.explicit else mode
        path = cfg["eval.checkpoint"] or checkpoint_path(cfg, mode)
        m = _load_model(cfg, path, prep.test[0].n_features)
        report = ex.evaluate(m, prep, ks)
    text = METRICS_HEADER + format_metric_rows(report.rows(run))
    write_atomic(_path(cfg, f"metrics-{run}.csv"), text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    rows = ex.run_sweep(cfg)
    text = ex.format_sweep_rows(rows)
    write_atomic(_path(cfg, "sweep.csv"), text)
    sys.stdout.write(f"{len(rows)} rows written to {_path(cfg, 'sweep.csv')}\n")
    return 0


def cmd_curve(cfg: ExperimentConfig) -> int:
    prep = ex.prepare(cfg)
    n_features = prep.test[0].n_features
    series = {"label": ex.label_curve(prep)}
    for mode in tuple(cfg["curve.methods"]) + ("click-only",):
        path = checkpoint_path(cfg, mode)
        if not os.path.exists(path):
            raise ConfigError(f"missing series {mode!r}: checkpoint {path} not found")
        series[mode] = ex.curve_for(_load_model(cfg, path, n_features), prep)
    rows = []
    summary = ["series,l1_to_label"]
    for name, curve in series.items():
        rows.extend(f"{i},{float(v)!r},{name}" for i, v in enumerate(curve, start=1))
        summary.append(f"{name},{curve_distance(curve, series['label'])!r}")
    write_atomic(_path(cfg, "curve.csv"), CURVE_HEADER + "\n".join(rows) + "\n")
    write_atomic(_path(cfg, "curve_summary.csv"), "\n".join(summary) + "\n")
    sys.stdout.write("\n".join(summary) + "\n")
    return 0


def cmd_gradcheck(cfg: ExperimentConfig) -> int:
    results = run_gradcheck(
        draws=cfg["gradcheck.draws"], seed=cfg["gradcheck.seed"], step=cfg["gradcheck.step"], tol=cfg["gradcheck.tol"]
    )
    sys.stdout.write(format_report(results))
    return 0 if all(r.ok for r in results) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "curve": cmd_curve,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drsr", description="Survival-based unbiased learning to rank")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="overrides run.seed")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--mode", choices=METHODS, help="overrides train.mode")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("DRSR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.out is not None:
        overrides["run.out"] = args.out
    if args.mode is not None:
        overrides["train.mode"] = args.mode
    try:
        cfg = read_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (DRSRError, OSError) as exc:
        kind = "I/O error" if isinstance(exc, OSError) else type(exc).__name__
        sys.stderr.write(f"drsr {args.command}: {kind}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
