"""Render a run's scalar logs to CSV and matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ParseError

SCALAR_FIELDS = ("epoch", "step", "loss", "lr", "samples")


def load_scalars(run_dir: Path | str) -> list[dict[str, Any]]:
    path = Path(run_dir) / "logs.jsonl"
    if not path.is_file():
        raise FileNotFoundError(f"no logs.jsonl under {run_dir}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return rows


def write_scalars_csv(rows: list[dict[str, Any]], path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCALAR_FIELDS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    return path


def _epoch_means(rows: list[dict[str, Any]]) -> tuple[list[int], list[float]]:
    by_epoch: dict[int, list[float]] = {}
    for r in rows:
        by_epoch.setdefault(int(r["epoch"]), []).append(float(r["loss"]))
    epochs = sorted(by_epoch)
    return epochs, [sum(by_epoch[e]) / len(by_epoch[e]) for e in epochs]


def render_run_report(run_dir: Path | str, out_dir: Path | str | None = None) -> dict[str, str]:
    """Write scalars.csv, loss_curve.png, and lr_schedule.png for a run.

    Returns the paths that were written, keyed by artifact name.
    """
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    rows = load_scalars(run_dir)

    paths: dict[str, str] = {}
    csv_path = write_scalars_csv(rows, out / "scalars.csv")
    paths["scalars_csv"] = str(csv_path)

    steps = [int(r["step"]) for r in rows]
    losses = [float(r["loss"]) for r in rows]
    epochs, epoch_losses = _epoch_means(rows)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(steps, losses, lw=0.9, alpha=0.55, label="per-step loss")
    if len(epochs) > 1:
        # place epoch means at each epoch's final step
        last_step = {int(r["epoch"]): int(r["step"]) for r in rows}
        ax.plot(
            [last_step[e] for e in epochs],
            epoch_losses,
            "o-",
            ms=3.5,
            label="epoch mean",
        )
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    loss_path = out / "loss_curve.png"
    fig.savefig(loss_path, dpi=130)
    plt.close(fig)
    paths["loss_curve"] = str(loss_path)

    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.step(steps, [float(r["lr"]) for r in rows], where="post")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("learning rate")
    ax.set_yscale("log")
    fig.tight_layout()
    lr_path = out / "lr_schedule.png"
    fig.savefig(lr_path, dpi=130)
    plt.close(fig)
    paths["lr_schedule"] = str(lr_path)

    eval_report = run_dir / "eval_report.json"
    if eval_report.is_file():
        paths["eval_report"] = str(eval_report)
    return paths
