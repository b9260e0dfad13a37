import json

import numpy as np
import pytest
from scipy import stats

from mhdropout.errors import ConfigError, DegenerateSampleError
from mhdropout.harness import cli
from mhdropout.harness.config import load_config, make_config, ratio_to_subset
from mhdropout.harness.datasets import gen_gaussian_mixture, gen_inverse_sine, gen_multipoint, inverse_sine_forward
from mhdropout.harness.experiments import RUNNERS, spread_ratio
from mhdropout.harness.metrics import inverse_sine_branches, match_components, mean_ci, sdd
from mhdropout.harness.output import read_csv, write_report


def test_multipoint_data():
    d = gen_multipoint(5, np.random.default_rng(0))
    assert d.targets.shape == (5, 2) and d.x.shape == (2,)
    assert np.all((d.targets >= 0) & (d.targets <= 1))
    e = gen_multipoint(5, np.random.default_rng(0))
    assert np.array_equal(d.x, e.x) and np.array_equal(d.targets, e.targets)


def test_inverse_sine_data():
    d = gen_inverse_sine(1000, np.random.default_rng(0))
    assert len(d.x) == 1000 and np.all((d.y > 0) & (d.y < 1))
    assert np.allclose(np.diff(d.y), d.y[1] - d.y[0])
    assert np.all(np.abs(d.noise) < 0.1)
    assert inverse_sine_forward(0.5) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(Exception):
        gen_inverse_sine(1, np.random.default_rng(0))


def test_gaussian_mixture_zero_covariance():
    d = gen_gaussian_mixture(np.random.default_rng(0), 100, sds=[[0, 0], [0, 0], [0, 0]])
    assert np.array_equal(d.samples, d.means[d.labels])


def test_gaussian_mixture_moments():
    d = gen_gaussian_mixture(np.random.default_rng(1), 100_000)
    for k in range(3):
        s = d.samples[d.labels == k]
        se = np.sqrt(np.diag(d.covariances[k]) / len(s))
        assert np.all(np.abs(s.mean(axis=0) - d.means[k]) < 3 * se)
        freq = len(s) / len(d.samples)
        lo, hi = stats.binom.interval(0.999, len(d.samples), d.weights[k])
        assert lo / len(d.samples) <= freq <= hi / len(d.samples)


def test_sdd_examples():
    Y = [np.array([[0.1, 0.2], [0.5, 0.9]])]
    assert sdd(Y, Y) == 0.0
    const = [np.zeros((4, 2))]
    target = [np.array([[-0.3, -0.4], [0.3, 0.4]])]
    assert sdd(const, target) == pytest.approx(0.5, rel=1e-15)
    rng = np.random.default_rng(0)
    A, B = [rng.normal(size=(5, 2)) for _ in range(3)], [rng.normal(size=(7, 2)) for _ in range(3)]
    assert sdd(A, B) == sdd(B, A) >= 0
    with pytest.raises(DegenerateSampleError):
        sdd([], [])
    with pytest.raises(DegenerateSampleError):
        sdd([np.zeros((0, 2))], [np.zeros((2, 2))])


def test_mean_ci_t_interval():
    v = [0.1, 0.3, 0.2, 0.5]
    m, lo, hi = mean_ci(v)
    ref = stats.t.interval(0.95, 3, loc=np.mean(v), scale=stats.sem(v))
    assert m == pytest.approx(np.mean(v)) and lo == pytest.approx(ref[0]) and hi == pytest.approx(ref[1])
    assert lo <= m <= hi
    assert mean_ci([0.4]) == (0.4, 0.4, 0.4)


def test_branch_oracle():
    for x in (0.45, 0.5, 0.55):
        b = inverse_sine_branches(x)
        assert len(b) == 3
        assert np.allclose(inverse_sine_forward(b), x, atol=1e-12)
    assert len(inverse_sine_branches(0.1)) == 1
    assert 0.5 in np.round(inverse_sine_branches(0.5), 12)


def test_component_matching():
    truth = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    li, ti = match_components(truth[[2, 0, 1]], truth)
    assert dict(zip(li, ti)) == {0: 2, 1: 0, 2: 1}


def test_spread_ratio_of_point_masses_is_zero():
    centres = np.array([[0.0, 0.0], [1.0, 1.0]])
    X = np.concatenate([centres[0] + np.random.default_rng(0).normal(0, 0.1, (50, 2)), centres[1] + np.random.default_rng(1).normal(0, 0.1, (50, 2))])
    assert spread_ratio(np.repeat(centres, 10, axis=0), X, centres) == 0.0
    assert spread_ratio(X, X, centres) == pytest.approx(1.0)


def test_ratio_to_subset():
    assert ratio_to_subset(0.05, 16) == 1
    assert ratio_to_subset(0.5, 16) == 8
    assert ratio_to_subset(1.0, 16) == 16
    assert ratio_to_subset(0.1, 64) == 6
    assert ratio_to_subset(0.25, 64) == 16
    with pytest.raises(ConfigError):
        ratio_to_subset(0.0, 16)
    with pytest.raises(ConfigError):
        ratio_to_subset(1.5, 16)


def test_config_defaults():
    assert make_config("sweep").trials == 30
    assert make_config("sine").count == 1000 and make_config("sine").ratio == 0.1
    assert make_config("gmm").ratio == 0.25
    assert make_config("multipoint").n_targets == 5


def test_config_rejects_bad_input(tmp_path):
    with pytest.raises(ConfigError, match="unknown config key"):
        make_config("sweep", {"stepz": 3})
    with pytest.raises(ConfigError):
        make_config("sweep", {"steps": "ten"})
    with pytest.raises(ConfigError):
        make_config("sweep", {"ratios": [0.0, 0.5]})
    with pytest.raises(ConfigError):
        make_config("sine", {"lam": -1.0})
    with pytest.raises(ConfigError):
        make_config("nope")
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config("sweep", p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config("sweep", p)
    p.write_text(json.dumps({"trials": 2, "learning_rate": 1}))
    cfg = load_config("sweep", p)
    assert cfg.trials == 2 and isinstance(cfg.learning_rate, float)


SMALL = {
    "sweep": {"trials": 2, "steps": 30, "ratios": [0.1, 0.5, 1.0]},
    "multipoint": {"trials": 2, "steps": 20},
    "sine": {"epochs": 2, "samples": 50, "count": 200},
    "gmm": {"steps": 30, "samples": 500, "count": 300},
    "vq-compare": {"steps": 30, "codes": [2, 4], "count": 200, "samples": 200},
}


@pytest.mark.parametrize("name", sorted(SMALL))
def test_experiments_reproducible_and_written(name, tmp_path):
    cfg = make_config(name, SMALL[name])
    a, b = RUNNERS[name](cfg), RUNNERS[name](cfg)
    pa, pb = write_report(a, tmp_path / "a"), write_report(b, tmp_path / "b")
    for x, y in zip(pa, pb):
        if x.suffix == ".csv":
            assert x.read_bytes() == y.read_bytes()
            rows = read_csv(x)
            assert rows and list(rows[0]) == a.tables[x.stem].header
    doc = json.loads(pa[-1].read_text())
    assert doc["config"] == json.loads(json.dumps(a.config))


def test_sweep_full_ratio_equals_vanilla_baseline():
    rep = RUNNERS["sweep"](make_config("sweep", SMALL["sweep"]))
    rows = rep.tables["sweep"].rows
    for k in range(2):
        swta = [r[5] for r in rows if r[0] == "swta" and r[1] == 1.0 and r[3] == k]
        van = [r[5] for r in rows if r[0] == "vanilla_wta" and r[3] == k]
        assert swta == van


def test_trial_seeds_follow_base_seed():
    rep = RUNNERS["multipoint"](make_config("multipoint", {"trials": 2, "steps": 1, "seed": 40}))
    assert sorted({r[2] for r in rep.tables["multipoint"].rows}) == [40, 41]


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert cli.main(["sine", "--config", str(bad)]) == 1
    assert cli.main(["sweep", "--trials", "0"]) == 1
    assert cli.main(["bogus"]) == 1
    diverge = tmp_path / "div.json"
    diverge.write_text(json.dumps({"learning_rate": 1e6, "epochs": 2, "count": 100, "baselines": False}))
    assert cli.main(["sine", "--config", str(diverge), "--out", str(tmp_path / "d"), "--no-figures"]) == 2


def test_cli_writes_csv_json_and_figure(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SMALL["vq-compare"]))
    out = tmp_path / "out"
    assert cli.main(["vq-compare", "--config", str(cfg), "--seed", "3", "--trials", "1", "--out", str(out)]) == 0
    assert (out / "vq_compare.csv").exists() and (out / "vq_compare.json").exists() and (out / "vq_compare.png").exists()
    assert {r["seed"] for r in read_csv(out / "vq_compare.csv")} == {"3"}
    assert cli.main(["gmm", "--print-config"]) == 0
    assert '"ratio": 0.25' in capsys.readouterr().out
