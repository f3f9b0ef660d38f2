"""Human-readable run summary assembled from on-disk artifacts."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .trend import DegenerateInputError, fit_trend


class MissingArtifactError(FileNotFoundError):
    def __init__(self, missing: list[str], run_dir):
        self.missing = missing
        super().__init__(f"{run_dir} is missing: {', '.join(missing)}")


def read_reward_curve(metrics_path) -> list[tuple[float, float]]:
    """(env_step, summed-over-agents episode reward) points from metrics.csv."""
    by_episode: dict[int, float] = {}
    steps: dict[int, int] = {}
    with open(metrics_path) as f:
        for row in csv.DictReader(f):
            ep = int(row["episode"])
            by_episode[ep] = by_episode.get(ep, 0.0) + float(row["reward"])
            steps[ep] = int(row["step"])
    return [(float(steps[ep]), by_episode[ep]) for ep in sorted(by_episode)]


def emit_report(run_dir, out_name: str = "report.md") -> Path:
    """Summarize one run directory; raises MissingArtifactError if bare."""
    run_dir = Path(run_dir)
    required = {"summary.json": run_dir / "summary.json",
                "metrics.csv": run_dir / "metrics.csv"}
    missing = [name for name, path in required.items() if not path.exists()]
    if missing:
        raise MissingArtifactError(missing, run_dir)

    summary = json.loads(required["summary.json"].read_text())
    curve = read_reward_curve(required["metrics.csv"])

    lines = [f"# Trial report: {summary.get('name', run_dir.name)}", ""]
    lines += ["| key | value |", "|---|---|"]
    for key in ("algorithm", "env_steps", "episodes", "num_agents",
                "mean_reward_last100", "total_reward_last100"):
        if key in summary:
            lines.append(f"| {key} | {summary[key]} |")
    lines.append("")

    lines.append("## Reward trend fits")
    for model in ("log", "linear"):
        try:
            fit = fit_trend(curve, model)
        except DegenerateInputError as exc:
            lines.append(f"- {model}: not fittable ({exc})")
            continue
        form = ("{a:.6g}*ln(x) + {b:.6g}" if model == "log" else
                "{a:.6g}*x + {b:.6g}").format(a=fit.a, b=fit.b)
        lines.append(f"- {model}: y = {form} (rmse {fit.rmse:.4g})")
    lines.append("")

    eval_reports = sorted(run_dir.glob("eval/trajectory_ep*.csv"))
    deviations_file = run_dir / "eval" / "deviations.json"
    if eval_reports and deviations_file.exists():
        dev = json.loads(deviations_file.read_text())
        lines.append("## Evaluation")
        lines.append(f"- episodes: {len(eval_reports)}")
        lines.append(f"- success rate: {dev.get('success_rate')}")
        lines.append(f"- max deviation [m]: {dev.get('max_deviation')}")
        lines.append(f"- mean deviation [m]: {dev.get('mean_deviation')}")
        lines.append("")

    lines.append("## Reproduce")
    lines.append("```")
    lines.append(f"coralsim train --spec {run_dir / 'spec.yaml'}")
    lines.append(f"coralsim eval --checkpoint {run_dir / 'final.npz'} "
                 f"--spec {run_dir / 'spec.yaml'} --episodes 10 --out {run_dir / 'eval'}")
    lines.append(f"coralsim report {run_dir}")
    lines.append("```")

    out_path = run_dir / out_name
    out_path.write_text("\n".join(lines) + "\n")
    return out_path
