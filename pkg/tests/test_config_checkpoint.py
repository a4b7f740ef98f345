import numpy as np
import pytest

from drsr.checkpoint import format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint
from drsr.config import SCHEMA, format_config, load_config, parse_config_text, read_config
from drsr.errors import ConfigError, DomainError, ParseError
from drsr.gradcheck import KindResult, format_report, run_gradcheck
from drsr.objectives import LOSS_KINDS
from drsr.survival import PARAM_NAMES, init_model
from drsr.synthetic import GRADE_MIX, make_dataset

# config


def test_defaults():
    cfg = load_config()
    assert cfg["train.mode"] == "point"
    assert cfg["loss.alpha"] == 0.5
    assert cfg["sim.max_list_len"] == 10
    sim = cfg.sim_config()
    assert (sim.model, sim.gamma1, sim.gamma2, sim.gamma3) == ("ccm", 0.5, 0.10, 0.04)
    tc = cfg.train_config()
    assert (tc.optimizer, tc.learning_rate, tc.batch_size, tc.epochs, tc.grad_clip) == ("adam", 1e-3, 32, 30, 5.0)
    assert tc.loss.pairs_per_session == 4 and tc.loss.kappa == 0.3 and tc.loss.r1_form == "bounded"


def test_parse_file_with_comments():
    text = "# comment\nsim.tau = 2.0  \n\nsweep.values = 0, 0.5,1\ntrain.grad_clip = none\n"
    cfg = load_config(text)
    assert cfg["sim.tau"] == 2.0
    assert cfg["sweep.values"] == (0.0, 0.5, 1.0)
    assert cfg["train.grad_clip"] is None
    assert cfg.explicit == frozenset({"sim.tau", "sweep.values", "train.grad_clip"})


@pytest.mark.parametrize(
    "text",
    [
        "sim.taux = 1",
        "no equals sign",
        "sim.tau = abc",
        "sim.tau = -1",
        "train.mode = listwise",
        "loss.alpha = 2",
        "sim.preset = transactional",
        "data.source = svmlight",
        "curve.methods = click-only",
        "sweep.variable = epsilon",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        load_config(text)


def test_click_only_rejects_loss_options():
    with pytest.raises(ConfigError, match="loss.alpha"):
        load_config("train.mode = click-only\nloss.alpha = 0.3\n")
    assert load_config("train.mode = click-only\n")["train.mode"] == "click-only"


def test_overrides_and_round_trip():
    cfg = load_config("sim.tau = 2", {"run.seed": 9})
    assert cfg["run.seed"] == 9 and "run.seed" in cfg.explicit
    again = load_config(format_config(cfg))
    assert again.values == cfg.values
    assert parse_config_text(format_config(cfg)).keys() == SCHEMA.keys()


def test_with_values():
    cfg = load_config().with_values(sim__model="pbm", sim__tau=0.0)
    assert cfg.sim_config().model == "pbm" and cfg.sim_config().tau == 0.0
    with pytest.raises(ConfigError):
        load_config().with_values(sim__nope=1)


def test_read_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config(tmp_path / "missing.cfg")


def test_explicit_gammas_override_preset():
    cfg = load_config("sim.preset = informational\nsim.gamma3 = 0.2\n")
    sim = cfg.sim_config()
    assert (sim.gamma2, sim.gamma3) == (0.40, 0.2)


# checkpoints


def test_checkpoint_round_trip_is_exact(tmp_path):
    m = init_model(3, 4, seed=2)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, m)
    back = load_checkpoint(path)
    for k, v in m.params().items():
        assert back.params()[k].tobytes() == v.tobytes()
    assert format_checkpoint(back) == path.read_text()


def test_checkpoint_layout():
    lines = format_checkpoint(init_model(2, 3)).splitlines()
    assert lines[0] == "drsr-ckpt v1"
    assert lines[1] == "dims 2 3"
    headers = [ln.split() for ln in lines[2:] if ln.split()[0] in PARAM_NAMES]
    assert [h[0] for h in headers] == list(PARAM_NAMES)
    shapes = {h[0]: (int(h[1]), int(h[2])) for h in headers}
    assert shapes["W_i"] == (3, 5) and shapes["b_i"] == (3, 1)
    assert shapes["w_head"] == (1, 3) and shapes["b_head"] == (1, 1)


def _corrupt(text, old, new):
    assert old in text
    return text.replace(old, new, 1)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: _corrupt(t, "drsr-ckpt v1", "drsr-ckpt v2"),
        lambda t: _corrupt(t, "dims 2 3", "dims 2"),
        lambda t: _corrupt(t, "b_head 1 1", "b_head 1 2"),
        lambda t: _corrupt(t, "W_o 3 5", "W_x 3 5"),
        lambda t: t.rsplit("\n", 2)[0] + "\n",
        lambda t: _corrupt(t, "b_f 3 1\n1.0", "b_f 3 1\ninf"),
        lambda t: _corrupt(t, "b_f 3 1\n1.0", "b_f 3 1\n1.0 2.0"),
        lambda t: t + "b_head 1 1\n0.0\n",
    ],
)
def test_checkpoint_rejects_corruption(mutate):
    with pytest.raises(ParseError):
        parse_checkpoint(mutate(format_checkpoint(init_model(2, 3))))


# synthetic data


def test_synthetic_shapes_and_determinism():
    a = make_dataset(n_queries=50, docs_per_query=10, n_features=20, seed=3)
    b = make_dataset(n_queries=50, docs_per_query=10, n_features=20, seed=3)
    assert len(a) == 50
    assert all(q.features.shape == (10, 20) for q in a)
    assert all(np.array_equal(x.features, y.features) and np.array_equal(x.labels, y.labels) for x, y in zip(a, b))
    x = np.concatenate([q.features for q in a])
    assert x.min() >= 0.0 and x.max() <= 1.0


def test_synthetic_grade_mix():
    qs = make_dataset(n_queries=400, seed=0)
    y = np.concatenate([q.labels for q in qs])
    freq = np.bincount(y, minlength=5) / y.size
    assert np.allclose(freq, GRADE_MIX, atol=0.01)
    qs2 = make_dataset(n_queries=50, y_max=2, seed=0)
    assert max(int(q.labels.max()) for q in qs2) == 2


def test_synthetic_validation():
    with pytest.raises(DomainError):
        make_dataset(n_queries=5, y_max=5)
    with pytest.raises(DomainError):
        make_dataset(n_queries=5, n_features=2)


# gradient check report


def test_gradcheck_covers_all_kinds():
    results = run_gradcheck(draws=2)
    assert [r.kind for r in results] == list(LOSS_KINDS)
    assert len(results) == 8 and all(r.ok for r in results)
    report = format_report(results).splitlines()
    assert len(report) == 9 and all(line.endswith("ok") for line in report[1:])


def test_gradcheck_report_marks_failures():
    report = format_report([KindResult("click", 0.5, 20, 1e-4)])
    assert report.splitlines()[1].endswith("FAIL")
