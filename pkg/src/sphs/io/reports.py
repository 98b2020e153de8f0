"""Report writers - markdown run reports, JSON documents and plot-ready CSV tables"""

import csv
import json
import os
from datetime import datetime

import numpy as np
from tabulate import tabulate

from sphs.utils.numerics import format_float


def _plain(value):
    # numpy scalars and arrays to JSON-compatible values
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    obj = _plain(obj)
    if isinstance(obj, list):
        return [to_jsonable(v) for v in obj]
    return obj


def write_json(document, path):
    """Write a JSON document (indent 2, trailing newline)"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(document), f, indent=2)
        f.write("\n")
    return path


def write_table_csv(path, header, rows):
    """CSV with a header row; floats written with 17 significant digits"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_history_csv(history, path):
    """Per-step loss and wall-clock seconds"""
    return write_table_csv(path, ["step", "loss", "seconds"], history.rows())


def format_stability_table(report):
    """Human-readable summary of a StabilityReport"""
    rows = [
        ["Model kind", report.kind],
        ["Hessian min eigenvalue at x*", f"{report.hessian_min_eigenvalue:.3e}"],
        ["Hessian positive definite", "yes" if report.hessian_pd_at_xstar else "no"],
        ["|dH(x*)|_inf", f"{report.equilibrium_gradient_norm:.3e}"],
        ["max |J + J^T|", f"{report.skewness_residual:.3e}"],
        [f"R min eigenvalue ({report.r_mode})", f"{report.r_min_eigenvalue:.3e}"],
        ["Convexity violations", f"{report.convexity_violations} / {report.convexity_checks}"],
        ["Verdict", report.verdict],
    ]
    return tabulate(rows, tablefmt="simple")


def format_metrics_table(names, values, header="RMSE"):
    return tabulate([[n, f"{v:.6e}"] for n, v in zip(names, values)], headers=["Channel", header])


def generate_training_report(out_dir, run):
    """
    Write ``report.md`` for a training run

    Args:
        out_dir: Run output directory
        run: Dictionary with keys model_spec, train_config, instances (list of
            dicts with seed, final_loss, steps, seconds, verdict, checkpoint),
            data (description), preset (optional)

    Returns:
        Path of the report
    """
    os.makedirs(out_dir, exist_ok=True)
    filepath = os.path.join(out_dir, "report.md")
    spec = run["model_spec"]
    train = run["train_config"]

    lines = []
    lines.append("# Training Run Report")
    lines.append(f"\n**Generated:** {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    if run.get("preset"):
        lines.append(f"\n**Preset:** {run['preset']}")
    lines.append("\n---\n")

    lines.append("## Model")
    lines.append(f"- **Kind:** {spec['kind']}")
    lines.append(f"- **State dimension (n):** {spec['state_dim']}")
    lines.append(f"- **Input dimension (m):** {spec['input_dim']}")
    lines.append(f"- **Hidden widths:** {spec['widths']}")
    if spec["kind"] != "node":
        lines.append(
            f"- **Matrices:** J {spec['j_mode']}, R {spec['r_mode']} ({spec['r_definiteness']}), G {spec['g_mode']}"
        )
        lines.append(f"- **epsilon:** {spec['epsilon']}")

    lines.append("\n## Training")
    lines.append(f"- **Regime:** {train['regime']} fitting")
    lines.append(f"- **Steps:** {train['steps']}")
    lines.append(f"- **Learning rate:** {train['learning_rate']}")
    if train["regime"] == "derivative":
        lines.append(f"- **Batch size:** {train['batch_size']}")
    else:
        lines.append(f"- **Rollout length:** {train['rollout_length'] or 'full trajectories'}")
        lines.append(f"- **RK4 substeps per sample:** {train['substeps']}")
        lines.append(f"- **Augmented states:** {train['augmented_dims']}")
    if run.get("data"):
        lines.append(f"- **Data:** {run['data']}")
    if run.get("noise_percent"):
        lines.append(f"- **Injected noise:** {run['noise_percent']}% of channel standard deviation")

    lines.append("\n## Instances")
    lines.append("\n| Instance | Seed | Final loss | Wall time (s) | Verdict | Checkpoint |")
    lines.append("|----------|------|------------|---------------|---------|------------|")
    for i, inst in enumerate(run["instances"]):
        loss = f"{inst['final_loss']:.4e}" if inst.get("final_loss") is not None else "-"
        lines.append(
            f"| {i} | {inst['seed']} | {loss} | {inst['seconds']:.1f} | {inst.get('verdict') or '-'} "
            f"| {os.path.relpath(inst['checkpoint'], out_dir)} |"
        )

    losses = [inst["final_loss"] for inst in run["instances"] if inst.get("final_loss") is not None]
    if len(losses) > 1:
        q25, q75 = np.percentile(losses, [25.0, 75.0])
        lines.append(f"\n**Final loss interquartile range:** [{q25:.4e}, {q75:.4e}]")

    lines.append("\n## Stability Conditions")
    lines.append("\nA port-Hamiltonian model")
    lines.append("\n$$\\dot{x} = (J(x) - R(x)) \\frac{\\partial H}{\\partial x} + G(x) u$$")
    lines.append("\nhas a globally asymptotically stable equilibrium $x^*$ when:")
    lines.append("- $H$ is convex with a positive definite Hessian at its minimum $x^*$")
    lines.append("- $J = -J^T$")
    lines.append("- $R = R^T \\succ 0$")
    lines.append("\nWith $R \\succeq 0$ only, all solutions remain bounded.")

    lines.append("\n---")
    lines.append("\n*Report generated by stable-phs*")

    with open(filepath, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return filepath
