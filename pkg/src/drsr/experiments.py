"""End-to-end pipelines: data -> initial ranker -> click log -> training -> metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .data import LabeledQuery, load_svmlight, split_queries, subsample_queries
from .errors import ConfigError, DegenerateSampleError
from .evaluation import MetricReport, evaluate_run, label_scorer, model_scorer, position_curve, rerankings
from .simulator import (
    InitialRanker,
    SimConfig,
    load_rho,
    rank_initial,
    sample_ranker_queries,
    simulate_click_log,
    train_initial_ranker,
)
from .survival import HazardModel
from .synthetic import make_dataset
from .trainer import train

log = logging.getLogger(__name__)


def load_queries(cfg: ExperimentConfig) -> list[LabeledQuery]:
    if cfg["data.source"] == "svmlight":
        try:
            return load_svmlight(cfg["data.path"])
        except OSError as exc:
            raise ConfigError(f"cannot read dataset {cfg['data.path']}: {exc}") from None
    return make_dataset(
        n_queries=cfg["data.queries"],
        docs_per_query=cfg["data.docs_per_query"],
        n_features=cfg["data.features"],
        y_max=cfg["sim.y_max"],
        seed=cfg["run.seed"],
        noise=cfg["data.noise"],
        interaction=cfg["data.interaction"],
    )


@dataclass
class Prepared:
    """Split data with the initial ranker and its displayed orders."""

    train: list
    valid: list
    test: list
    ranker: InitialRanker
    train_orders: list
    test_orders: list

    @property
    def queries_by_qid(self) -> dict:
        return {q.qid: q for q in self.train + self.valid + self.test}


def prepare(cfg: ExperimentConfig, queries=None) -> Prepared:
    """Split, fit the initial ranker on a small training sample and rank every query.

    ``data.fraction`` keeps a stable subset of the training queries for click
    simulation; the ranker always sees the same sample of the full split.
    """
    queries = load_queries(cfg) if queries is None else queries
    train_q, valid_q, test_q = split_queries(queries, cfg["data.split"])
    if not train_q or not test_q:
        raise ConfigError("split leaves no training or no test queries")
    seed = cfg["run.seed"]
    sample = sample_ranker_queries(train_q, cfg["sim.ranker_fraction"], seed)
    try:
        ranker = train_initial_ranker(sample, cfg["sim.ranker_epochs"], seed)
    except DegenerateSampleError as exc:
        raise ConfigError(f"initial ranker: {exc}") from None
    if cfg["data.fraction"] < 1:
        train_q = subsample_queries(train_q, cfg["data.fraction"])
    n = cfg["sim.max_list_len"]
    return Prepared(
        train_q,
        valid_q,
        test_q,
        ranker,
        [rank_initial(ranker, q, n) for q in train_q],
        [rank_initial(ranker, q, n) for q in test_q],
    )


def rho_schedule(cfg: ExperimentConfig):
    return load_rho(cfg["sim.rho_file"]) if cfg["sim.rho_file"] else None


def simulate_logs(cfg: ExperimentConfig, prep: Prepared, sim: SimConfig | None = None):
    sim = sim or cfg.sim_config()
    return simulate_click_log(
        prep.train, prep.train_orders, sim, cfg["sim.sessions_per_query"], cfg["run.seed"], rho_schedule(cfg)
    )


def train_method(cfg: ExperimentConfig, sessions, method: str):
    return train(sessions, cfg.train_config(mode=method))


def evaluate(model_or_scorer, prep: Prepared, ks=(1, 3, 5)) -> MetricReport:
    return evaluate_run(model_or_scorer, prep.test, prep.test_orders, ks)


def curve_for(scorer_or_model, prep: Prepared) -> np.ndarray:
    scorer = model_scorer(scorer_or_model) if isinstance(scorer_or_model, HazardModel) else scorer_or_model
    ranked = rerankings(scorer, prep.test, prep.test_orders)
    return position_curve(list(zip(prep.test_orders, ranked)))


def label_curve(prep: Prepared) -> np.ndarray:
    return curve_for(label_scorer, prep)


# --------------------------------------------------------------------------
# sweeps


def grid_config(cfg: ExperimentConfig, variable: str, value: float, seed: int) -> ExperimentConfig:
    over = {"run__seed": seed}
    if variable == "tau":
        over.update(sim__model="pbm", sim__tau=float(value))
    elif variable == "gamma1":
        over.update(sim__model="ccm", sim__gamma1=float(value))
    elif variable == "fraction":
        over.update(data__fraction=float(value))
    else:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    return cfg.with_values(**over)


def run_grid_point(cfg: ExperimentConfig, variable: str, value: float, seed: int, methods) -> list[tuple]:
    """Simulate, train every method and evaluate; rows are
    ``(variable, value, method, seed, metric, k, metric_value)``."""
    point_cfg = grid_config(cfg, variable, value, seed)
    prep = prepare(point_cfg)
    sessions, _ = simulate_logs(point_cfg, prep)
    rows = []
    for method in methods:
        model, _ = train_method(point_cfg, sessions, method)
        report = evaluate(model, prep, point_cfg["eval.ks"])
        for _, metric, k, v in report.rows(method):
            rows.append((variable, value, method, seed, metric, k, v))
        log.info("sweep %s=%s seed=%d %s done", variable, value, seed, method)
    return rows


def _grid_job(args):
    return run_grid_point(*args)


def run_sweep(cfg: ExperimentConfig) -> list[tuple]:
    values = cfg["sweep.values"]
    seeds = cfg["sweep.seeds"]
    methods = cfg["sweep.methods"]
    if not values or not seeds or not methods:
        raise ConfigError("sweep needs non-empty sweep.values, sweep.seeds and sweep.methods")
    jobs = [(cfg, cfg["sweep.variable"], v, s, methods) for v in values for s in seeds]
    if cfg["sweep.jobs"] == 1:
        results = [_grid_job(j) for j in jobs]
    else:
        # each job is self-contained and seeded, so results do not depend on scheduling
        with ProcessPoolExecutor(max_workers=cfg["sweep.jobs"]) as pool:
            results = list(pool.map(_grid_job, jobs))
    return [row for rows in results for row in rows]


SWEEP_HEADER = "sweep_variable,sweep_value,method,seed,metric,k,value\n"


def format_sweep_rows(rows) -> str:
    return SWEEP_HEADER + "".join(
        f"{var},{float(val)!r},{method},{seed},{metric},{k},{float(v)!r}\n" for var, val, method, seed, metric, k, v in rows
    )
