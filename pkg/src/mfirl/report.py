"""Loss and fit-time figures rendered from sweep ``summary.csv`` files."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {"rp": ("tab:blue", "o"), "po": ("tab:orange", "s"),
         "rp-resolve": ("tab:green", "^"), "random-baseline": ("0.5", None)}


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["episodes"] = int(r["episodes"])
        for k in ("mean_loss", "stderr_loss", "mean_fit_ms"):
            r[k] = float(r[k])
    return sorted(rows, key=lambda r: r["episodes"])


def render_env(out_dir: str | Path, env: str) -> list[Path]:
    """Draw loss vs. episodes (and fit time when recorded) for one env.

    Figures land in ``<out>/<env>/`` beside the per-model CSV directories.
    """
    env_dir = Path(out_dir) / env.replace(":", "-")
    summaries = {p.parent.name: read_summary(p) for p in sorted(env_dir.glob("*/summary.csv"))}
    if not summaries:
        return []
    written = []

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for model, rows in summaries.items():
        color, marker = STYLE.get(model, (None, "x"))
        x = [r["episodes"] for r in rows]
        y = [r["mean_loss"] for r in rows]
        se = [r["stderr_loss"] for r in rows]
        if model == "random-baseline":
            ax.plot(x, y, ls="--", color=color, label=model)
        else:
            ax.errorbar(x, y, yerr=se, color=color, marker=marker, capsize=3, label=model)
    ax.set_xscale("log")
    ax.set_xlabel("demonstration episodes")
    ax.set_ylabel("value loss")
    ax.set_title(env)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = env_dir / "loss.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    timed = {m: rows for m, rows in summaries.items()
             if m != "random-baseline" and any(r["mean_fit_ms"] > 0 for r in rows)}
    if timed:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for model, rows in timed.items():
            color, marker = STYLE.get(model, (None, "x"))
            ax.plot([r["episodes"] for r in rows], [r["mean_fit_ms"] / 1e3 for r in rows],
                    color=color, marker=marker, label=model)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("demonstration episodes")
        ax.set_ylabel("fit time [s]")
        ax.set_title(env)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = env_dir / "fit_time.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_all(out_dir: str | Path) -> list[Path]:
    written = []
    for env_dir in sorted(p for p in Path(out_dir).iterdir() if p.is_dir()):
        written += render_env(out_dir, env_dir.name)
    return written
