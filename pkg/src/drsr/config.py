"""Experiment configuration: ``key = value`` files with dotted namespaces.

Every recognised key has a default and a converter; unknown keys are errors so
typos surface immediately. ``ExperimentConfig.explicit`` records which keys
were set by the file or by overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, DomainError
from .objectives import LossConfig
from .simulator import CCM_PRESETS, SimConfig
from .trainer import TrainConfig


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _words(s: str) -> tuple:
    return tuple(v.strip() for v in s.split(",") if v.strip())


# key -> (converter, default)
SCHEMA = {
    "run.label": (str, "drsr"),
    "run.out": (str, "runs"),
    "run.seed": (int, 0),
    "data.source": (str, "synthetic"),
    "data.path": (str, ""),
    "data.queries": (int, 1000),
    "data.docs_per_query": (int, 10),
    "data.features": (int, 20),
    "data.noise": (float, 0.5),
    "data.interaction": (float, 1.0),
    "data.split": (_floats, (0.6, 0.1, 0.3)),
    "data.fraction": (float, 1.0),
    "sim.model": (str, "ccm"),
    "sim.preset": (str, "navigational"),
    "sim.tau": (float, 1.0),
    "sim.gamma1": (float, 0.5),
    "sim.gamma2": (_opt_float, None),
    "sim.gamma3": (_opt_float, None),
    "sim.epsilon": (float, 0.1),
    "sim.y_max": (int, 4),
    "sim.overshoot": (int, 2),
    "sim.max_list_len": (int, 10),
    "sim.sessions_per_query": (int, 10),
    "sim.rho_file": (str, ""),
    "sim.ranker_fraction": (float, 0.01),
    "sim.ranker_epochs": (int, 10),
    "train.mode": (str, "point"),
    "train.optimizer": (str, "adam"),
    "train.lr": (float, 1e-3),
    "train.batch_size": (int, 32),
    "train.epochs": (int, 30),
    "train.grad_clip": (_opt_float, 5.0),
    "train.hidden": (int, 32),
    "loss.alpha": (float, 0.5),
    "loss.pairs_per_session": (int, 4),
    "loss.r1_form": (str, "bounded"),
    "loss.kappa": (float, 0.3),
    "eval.scorer": (str, "model"),
    "eval.checkpoint": (str, ""),
    "eval.ks": (_ints, (1, 3, 5)),
    "curve.methods": (_words, ("point", "pair")),
    "sweep.variable": (str, "tau"),
    "sweep.values": (_floats, ()),
    "sweep.seeds": (_ints, (0, 1, 2)),
    "sweep.methods": (_words, ("point", "pair", "click-only")),
    "sweep.jobs": (int, 1),
    "gradcheck.draws": (int, 20),
    "gradcheck.step": (float, 1e-5),
    "gradcheck.tol": (float, 1e-4),
    "gradcheck.seed": (int, 0),
}

SWEEP_VARIABLES = ("tau", "gamma1", "fraction")
DRSR_METHODS = ("point", "pair")
METHODS = ("point", "pair", "click-only")


def parse_config_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def __getitem__(self, key):
        return self.values[key]

    def with_values(self, **dotted) -> "ExperimentConfig":
        """Copy with typed overrides; keys use ``__`` for the dot (``sim__tau``)."""
        vals = dict(self.values)
        keys = set(self.explicit)
        for k, v in dotted.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            vals[key] = v
            keys.add(key)
        return _validated(ExperimentConfig(vals, frozenset(keys)))

    # -- derived library configs

    def sim_config(self) -> SimConfig:
        v = self.values
        preset = v["sim.preset"]
        if preset and preset not in CCM_PRESETS:
            raise ConfigError(f"unknown CCM preset {preset!r}")
        g2, g3 = CCM_PRESETS.get(preset, (SimConfig.gamma2, SimConfig.gamma3))
        if v["sim.gamma2"] is not None:
            g2 = v["sim.gamma2"]
        if v["sim.gamma3"] is not None:
            g3 = v["sim.gamma3"]
        try:
            return SimConfig(
                model=v["sim.model"],
                tau=v["sim.tau"],
                gamma1=v["sim.gamma1"],
                gamma2=g2,
                gamma3=g3,
                epsilon=v["sim.epsilon"],
                y_max=v["sim.y_max"],
                overshoot=v["sim.overshoot"],
                max_list_len=v["sim.max_list_len"],
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def loss_config(self, mode: str | None = None) -> LossConfig:
        v = self.values
        try:
            return LossConfig(
                mode=mode or v["train.mode"],
                alpha=v["loss.alpha"],
                pairs_per_session=v["loss.pairs_per_session"],
                r1_form=v["loss.r1_form"],
                kappa=v["loss.kappa"],
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self, mode: str | None = None, seed: int | None = None) -> TrainConfig:
        v = self.values
        return TrainConfig(
            learning_rate=v["train.lr"],
            batch_size=v["train.batch_size"],
            epochs=v["train.epochs"],
            seed=v["run.seed"] if seed is None else seed,
            optimizer=v["train.optimizer"],
            grad_clip=v["train.grad_clip"],
            hidden_dim=v["train.hidden"],
            loss=self.loss_config(mode),
        )


def _validated(cfg: ExperimentConfig) -> ExperimentConfig:
    v = cfg.values
    if v["data.source"] not in ("synthetic", "svmlight"):
        raise ConfigError(f"data.source must be synthetic or svmlight, got {v['data.source']!r}")
    if v["data.source"] == "svmlight" and not v["data.path"]:
        raise ConfigError("data.path is required for svmlight data")
    if len(v["data.split"]) != 3:
        raise ConfigError("data.split needs three fractions")
    if not 0 < v["data.fraction"] <= 1 or not 0 < v["sim.ranker_fraction"] <= 1:
        raise ConfigError("data.fraction and sim.ranker_fraction must be in (0, 1]")
    if v["sim.sessions_per_query"] < 1:
        raise ConfigError("sim.sessions_per_query must be >= 1")
    if v["train.mode"] not in METHODS:
        raise ConfigError(f"train.mode must be one of {METHODS}, got {v['train.mode']!r}")
    if v["train.mode"] == "click-only":
        bad = sorted(k for k in cfg.explicit if k.startswith("loss."))
        if bad:
            raise ConfigError(f"click-only mode takes no survival loss options: {', '.join(bad)}")
    if v["eval.scorer"] not in ("model", "oracle"):
        raise ConfigError("eval.scorer must be model or oracle")
    if not v["eval.ks"] or min(v["eval.ks"]) < 1:
        raise ConfigError("eval.ks must list cutoffs >= 1")
    if v["sweep.variable"] not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}")
    for m in v["sweep.methods"]:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    for m in v["curve.methods"]:
        if m not in DRSR_METHODS:
            raise ConfigError(f"curve.methods takes DRSR modes only, got {m!r}")
    if v["sweep.jobs"] < 1 or v["gradcheck.draws"] < 1:
        raise ConfigError("sweep.jobs and gradcheck.draws must be >= 1")
    try:
        cfg.train_config()
        cfg.sim_config()
    except (DomainError, ConfigError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(text: str = "", overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file's keys, then ``overrides`` (already typed, dotted keys)."""
    raw = parse_config_text(text)
    values = {k: default for k, (_, default) in SCHEMA.items()}
    for key, s in raw.items():
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(s)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    explicit = set(raw)
    for key, v in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = v
        explicit.add(key)
    return _validated(ExperimentConfig(values, frozenset(explicit)))


def read_config(path=None, overrides=None) -> ExperimentConfig:
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_config(text, overrides)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical ``key = value`` rendering (loadable by :func:`load_config`)."""

    def show(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return str(v)

    return "".join(f"{k} = {show(cfg.values[k])}\n" for k in SCHEMA)
