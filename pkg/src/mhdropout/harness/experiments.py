"""Seeded multi-trial runners for the toy studies.

Every runner returns a :class:`Report`: named tables (header + rows, written
as CSV), a JSON-friendly summary and per-trial wall-clock times. Tables hold
no timings so reruns with the same config and seed give identical bytes.

Trial ``k`` uses seed ``config.seed + k``; independent streams for data,
initialisation, training and evaluation are keyed off that seed.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, backward, concat, index, log, mul, sgd_step, softmax, squared_l2, sub, total
from ..dropout import MHDropoutNetwork, all_bits
from ..errors import NumericError
from ..losses import row_winners, swta_loss_batch
from ..mhvq import (
    MHVQConfig,
    MHVQModel,
    VQConfig,
    VQModel,
    fit_categorical_posterior,
    mhvq_train_step,
    sample_latents,
    vq_train_step,
)
from ..mom import MoMConfig, MoMModel, component_summary, sample_with_variances, train_step
from ..network import MLP
from .config import ratio_to_subset
from .datasets import gen_clusters, gen_gaussian_mixture, gen_inverse_sine, gen_multipoint
from .metrics import inverse_sine_branches, match_components, mean_ci, sdd


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)


@dataclass
class Report:
    experiment: str
    config: dict
    tables: dict
    summary: dict
    durations_ms: list


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, *stream])


def _run_trials(fn, cfg):
    """``fn(cfg, k)`` for every trial, serially or in worker processes, in trial order."""
    ks = range(cfg.trials)
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_timed, [fn] * cfg.trials, [cfg] * cfg.trials, ks))
    return [_timed(fn, cfg, k) for k in ks]


def _timed(fn, cfg, k):
    t0 = time.perf_counter()
    out = fn(cfg, k)
    return out, (time.perf_counter() - t0) * 1000.0


def _finite(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise NumericError(f"non-finite {what}")
    return float(value)


# ---------------------------------------------------------------------------
# multi-point: subset-ratio sweep


def _multipoint_net(cfg, seed, subset_size, init_scale=1.0, bias_scale=0.0) -> MHDropoutNetwork:
    return MHDropoutNetwork(
        [cfg.input_size, cfg.hidden, cfg.output_size],
        [cfg.hidden_activation, cfg.output_activation],
        _rng(seed, 1),
        subset_size=subset_size,
        p=getattr(cfg, "p", 0.5),
        init_scale=init_scale,
        bias_scale=bias_scale,
    )


def train_swta(net: MHDropoutNetwork, x, targets, steps: int, learning_rate: float, rng, sequential=False) -> None:
    """Stochastic WTA on a shared input; each target draws its own subset.

    A step is one full-batch update, or with ``sequential`` one pass over the
    targets in shuffled order with an update per target.
    """
    for _ in range(steps):
        if not sequential:
            loss, _, _ = swta_loss_batch(net, x, targets, rng)
            backward(loss)
            sgd_step(net.parameters(), learning_rate)
            continue
        for i in rng.permutation(len(targets)):
            loss, _, _ = swta_loss_batch(net, x, targets[i : i + 1], rng)
            backward(loss)
            sgd_step(net.parameters(), learning_rate)


def enumerated_outputs(net: MHDropoutNetwork, x) -> np.ndarray:
    bits = all_bits(net)
    return net.forward_bits(Tensor(np.broadcast_to(x, (len(bits), len(x)))), bits).data


def _sweep_trial(cfg, k):
    seed = cfg.seed + k
    data = gen_multipoint(cfg.n_targets, _rng(seed, 0), cfg.input_size, cfg.output_size)
    n_sub = 2**cfg.hidden
    rows = []
    for r in cfg.ratios:
        t = ratio_to_subset(r, n_sub)
        net = _multipoint_net(cfg, seed, t)
        train_swta(net, data.x, data.targets, cfg.steps, cfg.learning_rate, _rng(seed, 2))
        value = sdd([enumerated_outputs(net, data.x)], [data.targets])
        rows.append(["swta", r, t, k, seed, _finite(value, "sdd")])
    if cfg.baselines:
        net = _multipoint_net(cfg, seed, n_sub)
        train_swta(net, data.x, data.targets, cfg.steps, cfg.learning_rate, _rng(seed, 2))
        value = sdd([enumerated_outputs(net, data.x)], [data.targets])
        rows.append(["vanilla_wta", 1.0, n_sub, k, seed, _finite(value, "sdd")])
        # Standard dropout training (one mask per target), MC sampling at inference.
        net = _multipoint_net(cfg, seed, 1)
        train_swta(net, data.x, data.targets, cfg.steps, cfg.learning_rate, _rng(seed, 2))
        for i, r in enumerate(cfg.ratios):
            t = ratio_to_subset(r, n_sub)
            bits = net.sample_bits((t,), _rng(seed, 3, i))
            out = net.forward_bits(Tensor(np.broadcast_to(data.x, (t, len(data.x)))), bits).data
            rows.append(["mc_dropout", r, t, k, seed, _finite(sdd([out], [data.targets]), "sdd")])
    return rows


def run_subset_ratio_sweep(cfg) -> Report:
    results = _run_trials(_sweep_trial, cfg)
    table = Table(["model", "ratio", "subset_size", "trial", "seed", "sdd"])
    for rows, _ in results:
        table.rows.extend(rows)
    groups: dict = {}
    for model, r, t, _, _, v in table.rows:
        groups.setdefault((model, r, t), []).append(v)
    points = []
    for (model, r, t), vals in groups.items():
        m, lo, hi = mean_ci(vals)
        points.append({"model": model, "ratio": r, "subset_size": t, "mean_sdd": m, "ci_low": lo, "ci_high": hi})
    summary = {"points": points}
    swta = {p["ratio"]: p["mean_sdd"] for p in points if p["model"] == "swta"}
    mid = [swta[r] for r in (0.5, 0.6, 0.7) if r in swta]
    low = [swta[r] for r in (0.05, 0.1) if r in swta]
    if mid and low:
        summary["mean_sdd_mid"] = float(np.mean(mid))
        summary["mean_sdd_low"] = float(np.mean(low))
    return Report("sweep", dataclasses.asdict(cfg), {"sweep": table}, summary, [d for _, d in results])


# ---------------------------------------------------------------------------
# multi-point: parameter sharing against independent predictors


def _ffn_outputs(nets, x) -> np.ndarray:
    return np.stack([n(Tensor(x)).data for n in nets])


def train_independent_wta(nets, x, targets, steps: int, learning_rate: float, rng=None, sequential=False) -> None:
    """Vanilla WTA over separate networks: only each target's closest network moves.

    ``steps`` and ``sequential`` mean the same as in :func:`train_swta`.
    """
    params = [p for n in nets for p in n.parameters()]
    x = Tensor(x)

    def update(ys):
        H = _ffn_outputs(nets, x.data)
        winners = row_winners(np.broadcast_to(H, (len(ys),) + H.shape), ys)
        loss = None
        for y, w in zip(ys, winners):
            term = squared_l2(nets[w](x), Tensor(y))
            loss = term if loss is None else loss + term
        backward(loss)
        sgd_step(params, learning_rate)

    for _ in range(steps):
        if sequential:
            for i in rng.permutation(len(targets)):
                update(targets[i : i + 1])
        else:
            update(targets)


def _coverage(H, targets, tol) -> int:
    return int(sum(np.min(np.linalg.norm(H - y, axis=1)) < tol for y in targets))


def _train_until_steady(train, outputs, cfg) -> int:
    """Run ``train(n)`` in chunks until outputs settle or ``cfg.steps`` is reached."""
    done, before = 0, outputs()
    while done < cfg.steps:
        n = min(cfg.check_every, cfg.steps - done)
        train(n)
        done += n
        after = outputs()
        if cfg.steady_tol > 0 and np.max(np.abs(after - before)) < cfg.steady_tol:
            break
        before = after
    return done


def _multipoint_trial(cfg, k):
    seed = cfg.seed + k
    data = gen_multipoint(cfg.n_targets, _rng(seed, 0), cfg.input_size, cfg.output_size)
    n_sub = 2**cfg.hidden
    net = _multipoint_net(cfg, seed, n_sub, cfg.init_scale, cfg.bias_scale)
    H0 = enumerated_outputs(net, data.x)
    sequential = cfg.schedule == "sequential"
    rng = _rng(seed, 2)
    used = _train_until_steady(
        lambda n: train_swta(net, data.x, data.targets, n, cfg.learning_rate, rng, sequential),
        lambda: enumerated_outputs(net, data.x),
        cfg,
    )
    H = enumerated_outputs(net, data.x)
    covered = _coverage(H, data.targets, cfg.tolerance)
    stale = int(np.sum(np.linalg.norm(H - H0, axis=1) < cfg.tolerance))
    rows = [["mh_dropout", k, seed, n_sub, net.num_parameters(), used, covered, int(covered == cfg.n_targets), stale]]

    init = _rng(seed, 4)
    acts = [cfg.hidden_activation, cfg.output_activation]
    nets = [
        MLP([cfg.input_size, cfg.hidden, cfg.output_size], acts, init, cfg.init_scale, cfg.bias_scale)
        for _ in range(cfg.n_predictors)
    ]
    H0 = _ffn_outputs(nets, data.x)
    rng = _rng(seed, 5)
    used = _train_until_steady(
        lambda n: train_independent_wta(nets, data.x, data.targets, n, cfg.learning_rate, rng, sequential),
        lambda: _ffn_outputs(nets, data.x),
        cfg,
    )
    H = _ffn_outputs(nets, data.x)
    covered = _coverage(H, data.targets, cfg.tolerance)
    stale = int(np.sum(np.linalg.norm(H - H0, axis=1) < cfg.tolerance))
    n_params = sum(n.num_parameters() for n in nets)
    rows.append(["independent_ffns", k, seed, len(nets), n_params, used, covered, int(covered == cfg.n_targets), stale])
    return rows


def run_multipoint(cfg) -> Report:
    results = _run_trials(_multipoint_trial, cfg)
    header = [
        "model", "trial", "seed", "n_hypotheses", "n_parameters", "steps", "targets_covered", "all_covered", "stale"
    ]
    table = Table(header)
    for rows, _ in results:
        table.rows.extend(rows)
    summary = {}
    for model in ("mh_dropout", "independent_ffns"):
        rs = [r for r in table.rows if r[0] == model]
        summary[model] = {
            "all_covered_fraction": float(np.mean([r[7] for r in rs])),
            "some_stale_fraction": float(np.mean([r[8] > 0 for r in rs])),
            "mean_targets_covered": float(np.mean([r[6] for r in rs])),
            "mean_steps": float(np.mean([r[5] for r in rs])),
        }
    return Report("multipoint", dataclasses.asdict(cfg), {"multipoint": table}, summary, [d for _, d in results])


# ---------------------------------------------------------------------------
# mixtures of dropout networks trained with the mixture WTA loss (MC dropout baseline)


class DropoutMixture:
    """``M`` dropout networks plus a coefficient network; one mask per forward."""

    def __init__(self, sizes, hidden_activation, n_components, p, rng):
        acts = [hidden_activation] * (len(sizes) - 2) + ["linear"]
        self.nets = [MHDropoutNetwork(sizes, acts, rng, p=p) for _ in range(n_components)]
        coef_sizes = [sizes[0], *sizes[1:-1], n_components]
        self.coef = MLP(coef_sizes, [hidden_activation] * (len(coef_sizes) - 2) + ["linear"], rng)

    def parameters(self):
        return [p for n in self.nets for p in n.parameters()] + self.coef.parameters()

    def train_step(self, X, Y, learning_rate, rng) -> float:
        """Batch mixture WTA ``-log(phi_w) ||y - h_w||^2`` averaged over rows."""
        X, Y = Tensor(X), Tensor(Y)
        n = X.shape[0]
        outs = [net.forward_bits(X, net.sample_bits((n,), rng)) for net in self.nets]
        H = concat(outs, axis=0)  # row m * n + i
        cube = H.data.reshape(len(self.nets), n, -1).transpose(1, 0, 2)
        w = row_winners(cube, Y.data)
        ar = np.arange(n)
        diff = sub(index(H, w * n + ar), Y)
        sq = total(mul(diff, diff), axis=1)
        phi = softmax(self.coef(X))
        loss = mul(total(mul(log(index(phi, (ar, w))), sq)), -1.0 / n)
        value = loss.item()
        backward(loss)
        sgd_step(self.parameters(), learning_rate)
        return value

    def sample(self, x, rng, count) -> tuple[np.ndarray, np.ndarray]:
        """``count`` draws at one input: component ``m ~ phi``, then one random mask."""
        phi = softmax(self.coef(Tensor(x))).data
        comps = rng.choice(len(self.nets), size=count, p=phi / phi.sum())
        values = np.empty((count, self.nets[0].output_size))
        for m, net in enumerate(self.nets):
            sel = np.nonzero(comps == m)[0]
            if len(sel):
                rows = Tensor(np.broadcast_to(x, (len(sel), len(x))))
                values[sel] = net.forward_bits(rows, net.sample_bits((len(sel),), rng)).data
        return comps, values


def _train_epochs(step, n, epochs, batch_size, rng):
    for _ in range(epochs):
        perm = rng.permutation(n)
        for i in range(0, n, batch_size):
            step(perm[i : i + batch_size])


# ---------------------------------------------------------------------------
# inverse sine


def _sine_trial(cfg, k):
    seed = cfg.seed + k
    data = gen_inverse_sine(cfg.count, _rng(seed, 0), cfg.noise)
    mu, sd = data.x.mean(), data.x.std()
    X = ((data.x - mu) / sd)[:, None]
    Y = data.y[:, None]
    n_sub = 2 ** sum(cfg.offset_hidden)
    mom_cfg = MoMConfig(
        1,
        1,
        cfg.n_components,
        encoder_hidden=tuple(cfg.hidden),
        coef_hidden=tuple(cfg.hidden),
        offset_hidden=tuple(cfg.offset_hidden),
        subset_size=ratio_to_subset(cfg.ratio, n_sub),
        p=cfg.p,
        lam=cfg.lam,
        inference_mean=cfg.inference_mean,
    )
    model = MoMModel(mom_cfg, _rng(seed, 1))
    trng = _rng(seed, 2)
    _train_epochs(lambda b: train_step(model, X[b], Y[b], cfg.learning_rate, trng), len(X), cfg.epochs, cfg.batch_size, trng)

    ffn = mixture = None
    if cfg.baselines:
        ffn = MLP([1, *cfg.hidden, 1], ["tanh"] * len(cfg.hidden) + ["linear"], _rng(seed, 4))

        def ffn_step(b):
            loss = squared_l2(ffn(Tensor(X[b])), Tensor(Y[b])) * (1.0 / len(b))
            backward(loss)
            sgd_step(ffn.parameters(), cfg.ffn_learning_rate)

        _train_epochs(ffn_step, len(X), cfg.epochs, cfg.batch_size, _rng(seed, 5))
        mixture = DropoutMixture([1, *cfg.hidden, 1], "tanh", cfg.n_components, cfg.p, _rng(seed, 6))
        mrng = _rng(seed, 7)
        _train_epochs(lambda b: mixture.train_step(X[b], Y[b], cfg.learning_rate, mrng), len(X), cfg.epochs, cfg.batch_size, mrng)

    erng = _rng(seed, 3)
    metrics, dump = [], []
    for xq in cfg.eval_x:
        xs = np.array([(xq - mu) / sd])
        branches = inverse_sine_branches(xq)
        for j, b in enumerate(branches):
            dump.append([k, "truth", xq, "branch", j, float(b)])
        s = component_summary(model, xs)
        centres = (s.means + s.offset_means if cfg.inference_mean == "predictive" else s.means)[:, 0]
        for m in range(model.n_components):
            dump.append([k, "mom", xq, "component_mean", m, float(centres[m])])
            dump.append([k, "mom", xq, "component_weight", m, float(s.weights[m])])
            dump.append([k, "mom", xq, "component_sd", m, float(np.sqrt(s.variances[m, 0]))])
        branch_err = max(float(np.min(np.abs(centres - b))) for b in branches)
        draws = sample_with_variances(model, xs, erng, cfg.samples).values[:, 0]
        dist = np.min(np.abs(draws[:, None] - branches[None, :]), axis=1)
        metrics.append(
            [k, seed, "mom", xq, len(branches), branch_err, float(np.mean(dist < 0.1)), float(dist.mean()), ""]
        )
        if ffn is not None:
            pred = float(ffn(Tensor(xs)).data[0])
            dump.append([k, "ffn", xq, "prediction", 0, pred])
            between = int(branches.min() < pred < branches.max())
            d = float(np.min(np.abs(branches - pred)))
            metrics.append([k, seed, "ffn", xq, len(branches), "", float(d < 0.1), d, between])
            _, vals = mixture.sample(xs, erng, cfg.samples)
            dist = np.min(np.abs(vals[:, 0][:, None] - branches[None, :]), axis=1)
            metrics.append(
                [k, seed, "mc_dropout_mixture", xq, len(branches), "", float(np.mean(dist < 0.1)), float(dist.mean()), ""]
            )
    # Samples across the input range for plotting.
    for xq in np.linspace(data.x.min(), data.x.max(), 41):
        xq = float(xq)
        xs = np.array([(xq - mu) / sd])
        for i, v in enumerate(sample_with_variances(model, xs, erng, 20).values[:, 0]):
            dump.append([k, "mom", xq, "sample", i, float(v)])
        if ffn is not None:
            dump.append([k, "ffn", xq, "prediction", 0, float(ffn(Tensor(xs)).data[0])])
            for i, v in enumerate(mixture.sample(xs, erng, 20)[1][:, 0]):
                dump.append([k, "mc_dropout_mixture", xq, "sample", i, float(v)])
    for row in metrics:
        for v in row[5:8]:
            if v != "":
                _finite(v, "sine metric")
    return metrics, dump


def run_sine_experiment(cfg) -> Report:
    results = _run_trials(_sine_trial, cfg)
    metrics = Table(
        ["trial", "seed", "model", "x", "n_branches", "max_branch_error", "frac_within_0.1", "mean_distance", "between"]
    )
    dump = Table(["trial", "model", "x", "quantity", "index", "value"])
    for (m, d), _ in results:
        metrics.rows.extend(m)
        dump.rows.extend(d)
    summary = {}
    mom = [r for r in metrics.rows if r[2] == "mom"]
    summary["mom"] = {
        "max_branch_error": max(r[5] for r in mom),
        "min_frac_within_0.1": min(r[6] for r in mom),
        "max_mean_distance": max(r[7] for r in mom),
    }
    ffn = [r for r in metrics.rows if r[2] == "ffn"]
    if ffn:
        summary["ffn"] = {"all_between_branches": all(r[8] == 1 for r in ffn)}
        mc = [r for r in metrics.rows if r[2] == "mc_dropout_mixture"]
        summary["mc_dropout_mixture"] = {"min_frac_within_0.1": min(r[6] for r in mc)}
    tables = {"sine_metrics": metrics, "sine_samples": dump}
    return Report("sine", dataclasses.asdict(cfg), tables, summary, [d for _, d in results])


# ---------------------------------------------------------------------------
# Gaussian mixture


def _component_rows(k, seed, model_name, comps, values, centres, weights, data):
    """Match learned components to the truth and compare means and spreads."""
    li, ti = match_components(centres, data.means)
    rows = []
    for m, t in zip(li, ti):
        v = values[comps == m]
        true_var = np.diag(data.covariances[t])
        var = v.var(axis=0) if len(v) >= 2 else np.full(len(true_var), np.nan)
        err = float(np.linalg.norm(centres[m] - data.means[t]))
        ratio = float(var.sum() / true_var.sum())
        per_dim = var / true_var
        rows.append(
            [k, seed, model_name, int(m), int(t), float(weights[m]), float(data.weights[t]), *map(float, centres[m]), err, ratio, *map(float, per_dim)]
        )
    return rows


def _gmm_trial(cfg, k):
    seed = cfg.seed + k
    data = gen_gaussian_mixture(_rng(seed, 0), cfg.count, cfg.means, cfg.sds, cfg.weights)
    mu, sc = data.samples.mean(axis=0), data.samples.std(axis=0)
    Yn = (data.samples - mu) / sc
    d = Yn.shape[1]
    x = np.array([1.0])
    n_sub = 2 ** sum(cfg.offset_hidden)
    mom_cfg = MoMConfig(
        1,
        d,
        cfg.n_components,
        encoder_hidden=tuple(cfg.hidden),
        coef_hidden=tuple(cfg.hidden),
        offset_hidden=tuple(cfg.offset_hidden),
        subset_size=ratio_to_subset(cfg.ratio, n_sub),
        p=cfg.p,
        lam=cfg.lam,
        inference_mean=cfg.inference_mean,
        variance_samples=cfg.variance_samples,
    )
    model = MoMModel(mom_cfg, _rng(seed, 1))
    trng = _rng(seed, 2)
    Xb = np.ones((cfg.batch_size, 1))
    for _ in range(cfg.steps):
        train_step(model, Xb, Yn[trng.integers(0, len(Yn), cfg.batch_size)], cfg.learning_rate, trng)

    erng = _rng(seed, 3)
    draws = sample_with_variances(model, x, erng, cfg.samples)
    values = draws.values * sc + mu
    s = component_summary(model, x)
    centres = (s.means + s.offset_means if cfg.inference_mean == "predictive" else s.means) * sc + mu
    rows = _component_rows(k, seed, "mom", draws.components, values, centres, s.weights, data)
    dump = [[k, "data", int(c), *map(float, v)] for c, v in zip(data.labels[:2000], data.samples[:2000])]
    dump += [[k, "mom", int(c), *map(float, v)] for c, v in zip(draws.components[:2000], values[:2000])]

    if cfg.baselines:
        mixture = DropoutMixture([1, *cfg.hidden, d], "tanh", cfg.n_components, cfg.p, _rng(seed, 6))
        mrng = _rng(seed, 7)
        for _ in range(cfg.steps):
            mixture.train_step(Xb, Yn[mrng.integers(0, len(Yn), cfg.batch_size)], cfg.learning_rate, mrng)
        comps, vals = mixture.sample(x, erng, cfg.samples)
        vals = vals * sc + mu
        phi = softmax(mixture.coef(Tensor(x))).data
        centres = np.array(
            [vals[comps == m].mean(axis=0) if np.any(comps == m) else np.full(d, np.inf) for m in range(cfg.n_components)]
        )
        centres = np.where(np.isfinite(centres), centres, 1e6)
        rows += _component_rows(k, seed, "mc_dropout_mixture", comps, vals, centres, phi, data)
        dump += [[k, "mc_dropout_mixture", int(c), *map(float, v)] for c, v in zip(comps[:2000], vals[:2000])]
    return rows, dump


def run_gaussian_mixture_experiment(cfg) -> Report:
    results = _run_trials(_gmm_trial, cfg)
    d = len(cfg.means[0])
    coords = "xyzw"[:d] if d <= 4 else [str(i) for i in range(d)]
    table = Table(
        ["trial", "seed", "model", "component", "true_component", "weight", "true_weight"]
        + [f"mean_{c}" for c in coords]
        + ["mean_error", "variance_ratio"]
        + [f"variance_ratio_{c}" for c in coords]
    )
    dump = Table(["trial", "model", "component"] + list(coords))
    for (rows, dm), _ in results:
        table.rows.extend(rows)
        dump.rows.extend(dm)
    ie, iv = 7 + d, 8 + d
    summary = {}
    for model in ("mom", "mc_dropout_mixture"):
        rs = [r for r in table.rows if r[2] == model]
        if rs:
            ratios = [r[iv] for r in rs]
            summary[model] = {
                "max_mean_error": max(r[ie] for r in rs),
                "min_variance_ratio": min(ratios),
                "max_variance_ratio": max(ratios),
            }
    tables = {"gmm": table, "gmm_samples": dump}
    return Report("gmm", dataclasses.asdict(cfg), tables, summary, [dd for _, dd in results])


# ---------------------------------------------------------------------------
# VQ against MH-VQ


def init_codebook_from_data(codebook, encoder, X, rng) -> None:
    """Seed the embeddings with encoder outputs of randomly chosen data points."""
    idx = rng.choice(len(X), codebook.n_codes, replace=len(X) < codebook.n_codes)
    codebook.embeddings.data = encoder(Tensor(X[idx])).data.copy()


def spread_ratio(generated: np.ndarray, X: np.ndarray, centres: np.ndarray) -> float:
    """Mean over clusters of generated-to-data total variance.

    Points are assigned to the nearest true centre; a cluster with fewer than
    two generated points contributes a ratio of zero.
    """
    ga = np.argmin(np.linalg.norm(generated[:, None] - centres[None], axis=2), axis=1)
    da = np.argmin(np.linalg.norm(X[:, None] - centres[None], axis=2), axis=1)
    out = []
    for c in range(len(centres)):
        g = generated[ga == c]
        out.append(g.var(axis=0).sum() / X[da == c].var(axis=0).sum() if len(g) >= 2 else 0.0)
    return float(np.mean(out))


def _vq_trial(cfg, k):
    seed = cfg.seed + k
    centres = np.asarray(cfg.centres, dtype=np.float64)
    X, _ = gen_clusters(_rng(seed, 0), cfg.count, centres, cfg.spread)
    rows = []
    for K in cfg.codes:
        for kind in ("vq", "mhvq"):
            base = dict(input_size=X.shape[1], latent_size=cfg.latent_size, encoder_hidden=(cfg.hidden,), decoder_hidden=(cfg.hidden,), beta=cfg.beta)
            if kind == "vq":
                model = VQModel(VQConfig(n_codes=K, **base), _rng(seed, 1, K))
            else:
                model = MHVQModel(
                    MHVQConfig(
                        n_codes=K // 2,
                        n_secondary_codes=K // 2,
                        secondary_hidden=(cfg.hidden,),
                        offset_hidden=tuple(cfg.offset_hidden),
                        subset_size=cfg.subset_size,
                        latent_weight=cfg.latent_weight,
                        **base,
                    ),
                    _rng(seed, 1, K),
                )
            irng = _rng(seed, 5, K)
            init_codebook_from_data(model.codebook, model.encoder, X, irng)
            if kind == "mhvq":
                init_codebook_from_data(model.secondary_codebook, model.secondary_encoder, X, irng)
            trng = _rng(seed, 2, K)
            for _ in range(cfg.steps):
                batch = X[trng.integers(0, len(X), cfg.batch_size)]
                if kind == "vq":
                    vq_train_step(model, batch, cfg.learning_rate)
                else:
                    mhvq_train_step(model, batch, cfg.learning_rate, trng)
            mse = _finite(float(((model.reconstruct(X) - X) ** 2).sum(axis=1).mean()), "reconstruction error")
            table = fit_categorical_posterior(model, X)
            draws = sample_latents(model, table, _rng(seed, 3, K), cfg.samples)
            generated = model.decoder(Tensor(draws.latents)).data
            secondary = K // 2 if kind == "mhvq" else 0
            rows.append([kind, K, K - secondary, secondary, k, seed, mse, spread_ratio(generated, X, centres)])
    return rows


def run_vq_comparison(cfg) -> Report:
    results = _run_trials(_vq_trial, cfg)
    table = Table(["model", "total_codes", "primary_codes", "secondary_codes", "trial", "seed", "recon_mse", "spread_ratio"])
    for rows, _ in results:
        table.rows.extend(rows)
    mean = {}
    for model, K, *_, mse, spread in table.rows:
        mean.setdefault((model, K), []).append((mse, spread))
    points = [
        {"model": m, "total_codes": K, "recon_mse": float(np.mean([a for a, _ in v])), "spread_ratio": float(np.mean([b for _, b in v]))}
        for (m, K), v in mean.items()
    ]
    within = len(cfg.centres[0]) * cfg.spread**2
    checks = []
    for K in cfg.codes:
        if 2 * K in cfg.codes and ("mhvq", K) in mean:
            mh = float(np.mean([a for a, _ in mean[("mhvq", K)]]))
            vq = float(np.mean([a for a, _ in mean[("vq", 2 * K)]]))
            checks.append({"mhvq_codes": K, "vq_codes": 2 * K, "mhvq_mse": mh, "vq_mse": vq, "mhvq_not_worse": mh <= vq})
    summary = {"points": points, "within_cluster_variance": within, "efficiency_checks": checks}
    return Report("vq-compare", dataclasses.asdict(cfg), {"vq_compare": table}, summary, [d for _, d in results])


RUNNERS = {
    "sweep": run_subset_ratio_sweep,
    "multipoint": run_multipoint,
    "sine": run_sine_experiment,
    "gmm": run_gaussian_mixture_experiment,
    "vq-compare": run_vq_comparison,
}
