"""Figures rendered from experiment reports (PNG, headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}

COLOURS = {"swta": "C0", "mc_dropout": "C1", "vanilla_wta": "C2", "mom": "C0", "ffn": "C3", "mc_dropout_mixture": "C1", "data": "0.6", "vq": "C1", "mhvq": "C0"}


def _save(fig, path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def _rows(table, **match):
    cols = {h: i for i, h in enumerate(table.header)}
    return [r for r in table.rows if all(r[cols[k]] == v for k, v in match.items())], cols


def plot_sweep(report, out_dir):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for model in ("swta", "mc_dropout", "vanilla_wta"):
        pts = sorted((p for p in report.summary["points"] if p["model"] == model), key=lambda p: p["ratio"])
        if not pts:
            continue
        r = [p["ratio"] for p in pts]
        m = [p["mean_sdd"] for p in pts]
        if model == "vanilla_wta":
            ax.axhline(m[0], color=COLOURS[model], ls="--", lw=1, label="vanilla WTA")
            continue
        ax.plot(r, m, marker="o", ms=3, color=COLOURS[model], label={"swta": "SWTA", "mc_dropout": "MC dropout"}[model])
        ax.fill_between(r, [p["ci_low"] for p in pts], [p["ci_high"] for p in pts], color=COLOURS[model], alpha=0.2, lw=0)
    ax.set_xlabel("subset ratio")
    ax.set_ylabel("SDD")
    ax.legend(frameon=False)
    return [_save(fig, Path(out_dir) / "sweep.png")]


def plot_multipoint(report, out_dir):
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    names = ["mh_dropout", "independent_ffns"]
    covered = [report.summary[n]["all_covered_fraction"] for n in names]
    stale = [report.summary[n]["some_stale_fraction"] for n in names]
    x = np.arange(len(names))
    ax.bar(x - 0.2, covered, 0.4, label="all targets covered")
    ax.bar(x + 0.2, stale, 0.4, label="some hypothesis never moved")
    ax.set_xticks(x, ["MH dropout", "16 FFNs"])
    ax.set_ylabel("fraction of trials")
    ax.set_ylim(0, 1.05)
    ax.legend(frameon=False)
    return [_save(fig, Path(out_dir) / "multipoint.png")]


def plot_sine(report, out_dir):
    table = report.tables["sine_samples"]
    models = [m for m in ("mom", "mc_dropout_mixture", "ffn") if _rows(table, model=m, trial=0)[0]]
    fig, axes = plt.subplots(1, len(models), figsize=(3.2 * len(models), 3.0), sharey=True, squeeze=False)
    y = np.linspace(0.0, 1.0, 400)
    for ax, model in zip(axes[0], models):
        ax.plot(y + 0.3 * np.sin(2 * np.pi * y), y, color="0.7", lw=1)
        rows, c = _rows(table, model=model, trial=0, quantity="sample")
        if rows:
            ax.scatter([r[c["x"]] for r in rows], [r[c["value"]] for r in rows], s=2, color=COLOURS[model])
        rows, c = _rows(table, model=model, trial=0, quantity="prediction")
        if rows:
            pts = sorted((r[c["x"]], r[c["value"]]) for r in rows)
            ax.plot(*zip(*pts), color=COLOURS[model])
        ax.set_title(model.replace("_", " "))
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("y")
    return [_save(fig, Path(out_dir) / "sine.png")]


def plot_gmm(report, out_dir):
    table = report.tables["gmm_samples"]
    models = [m for m in ("data", "mom", "mc_dropout_mixture") if _rows(table, model=m, trial=0)[0]]
    fig, axes = plt.subplots(1, len(models), figsize=(3.0 * len(models), 3.0), sharex=True, sharey=True, squeeze=False)
    for ax, model in zip(axes[0], models):
        rows, c = _rows(table, model=model, trial=0)
        ax.scatter([r[c["x"]] for r in rows], [r[c["y"]] for r in rows], s=1, c=[f"C{r[c['component']]}" for r in rows])
        ax.set_title(model.replace("_", " "))
        ax.set_aspect("equal")
    return [_save(fig, Path(out_dir) / "gmm.png")]


def plot_vq(report, out_dir):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(6.4, 2.8))
    for model in ("vq", "mhvq"):
        pts = sorted((p for p in report.summary["points"] if p["model"] == model), key=lambda p: p["total_codes"])
        k = [p["total_codes"] for p in pts]
        a1.plot(k, [p["recon_mse"] for p in pts], marker="o", ms=3, color=COLOURS[model], label=model.upper())
        a2.plot(k, [p["spread_ratio"] for p in pts], marker="o", ms=3, color=COLOURS[model], label=model.upper())
    a1.set_yscale("log")
    a1.set_xlabel("total codebook entries")
    a1.set_ylabel("reconstruction MSE")
    a2.axhline(1.0, color="0.7", lw=1)
    a2.set_xlabel("total codebook entries")
    a2.set_ylabel("generated / data spread")
    a1.legend(frameon=False)
    return [_save(fig, Path(out_dir) / "vq_compare.png")]


PLOTTERS = {"sweep": plot_sweep, "multipoint": plot_multipoint, "sine": plot_sine, "gmm": plot_gmm, "vq-compare": plot_vq}


def render(report, out_dir) -> list[Path]:
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        return PLOTTERS[report.experiment](report, out_dir)
