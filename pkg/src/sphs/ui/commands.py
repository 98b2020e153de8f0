"""Subcommand implementations; each takes a RunSpec and returns a summary dictionary"""

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from tabulate import tabulate

from sphs.calculators.generators import gen_linear_phs, gen_spinning_body
from sphs.calculators.ode import InputSignal, IntegrationConfig, integrate
from sphs.calculators.pod import DEFAULT_LATENT_DIM, encode, pod_fit, reconstruction_error, set_equilibrium
from sphs.calculators.preprocessing import add_noise, fit_normalizer
from sphs.calculators.train import TrainConfig, fit
from sphs.calculators.verify import (
    DEFAULT_BOX_HALFWIDTH,
    DEFAULT_SAMPLES,
    boundedness_probe,
    rmse,
    rmse_per_dim,
    verify_stability,
)
from sphs.core.equations import DEFAULT_DAMPING, DEFAULT_INERTIA, rigid_energy
from sphs.core.errors import ConfigurationError, DataError
from sphs.core.presets import get_preset, preset_model_spec, preset_train_config
from sphs.io.checkpoint import Checkpoint, load_checkpoint, save_basis, save_checkpoint
from sphs.io.config import config
from sphs.io.reports import (
    format_metrics_table,
    format_stability_table,
    generate_training_report,
    write_history_csv,
    write_json,
    write_table_csv,
)
from sphs.io.trajectory import DerivativePairs, Trajectory, load_csv, load_pairs, load_table, save_csv, save_pairs
from sphs.models import phs
from sphs.models.phs import ModelSpec, build_model
from sphs.utils.numerics import interquartile_summary

logger = logging.getLogger(__name__)


def _out_dir(spec, default):
    out = spec.get("out") or os.path.abspath(default)
    os.makedirs(out, exist_ok=True)
    return out


def _out_file(spec, default_name):
    """Output file: ``out`` if it names a file, else ``out/default_name``"""
    out = spec.get("out")
    if out and os.path.splitext(out)[1]:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        return out
    directory = out or os.getcwd()
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, default_name)


def _grid(values):
    """Time grid from a list of times or {start, stop, step}"""
    if values is None:
        return None
    if isinstance(values, dict):
        start = float(values.get("start", 0.0))
        stop = float(values["stop"])
        step = float(values["step"])
        if step <= 0 or stop < start:
            raise ConfigurationError(f"Invalid time grid: {values}")
        return start + step * np.arange(int(math.floor((stop - start) / step + 1e-9)) + 1)
    return np.asarray(values, dtype=np.float64)


# -- generate -----------------------------------------------------------------


def cmd_generate(spec):
    """
    Write synthetic trajectories ``traj_NNN.csv`` and a derivative-pair file ``pairs.csv``

    Systems: "spinning_body" (default) and "linear_phs".
    """
    system = spec.get("system", "spinning_body")
    out = _out_dir(spec, "data")
    duration = float(spec.get("duration", 50.0 if system == "spinning_body" else 20.0))
    dt = float(spec.get("dt", 0.1))
    if system == "spinning_body":
        trajectories = gen_spinning_body(
            inertia=spec.get("inertia", DEFAULT_INERTIA),
            mu=float(spec.get("mu", DEFAULT_DAMPING)),
            n_traj=int(spec.get("n_traj", 10)),
            duration=duration,
            dt=dt,
            seed=spec.seed,
        )
    elif system == "linear_phs":
        excitation = spec.get("input", {})
        trajectories = gen_linear_phs(
            A=spec.get("A"),
            B=spec.get("B"),
            n_traj=int(spec.get("n_traj", 5)),
            duration=duration,
            dt=dt,
            seed=spec.seed,
            period=float(excitation.get("period", 4.0)),
            amplitude=float(excitation.get("amplitude", 0.5)),
            x0_box=tuple(spec.get("x0_box", (-1.0, 1.0))),
        )
    else:
        raise ConfigurationError(f"Unknown system: {system}. Choose from: ['spinning_body', 'linear_phs']")

    files = []
    for i, traj in enumerate(trajectories):
        path = os.path.join(out, f"traj_{i:03d}.csv")
        save_csv(traj, path)
        files.append(path)
    pairs_path = os.path.join(out, "pairs.csv")
    save_pairs(DerivativePairs.from_trajectories(trajectories), pairs_path)
    print(f"[OK] Wrote {len(files)} trajectories and {pairs_path}")
    return {"trajectories": files, "pairs": pairs_path}


# -- train --------------------------------------------------------------------


def _load_training_data(spec):
    data = spec.require("data")
    trajectories = [load_csv(spec.path(p)) for p in data.get("trajectories", [])]
    pairs = [load_pairs(spec.path(p)) for p in data.get("pairs", [])]
    if not trajectories and not pairs:
        raise ConfigurationError("Training data needs 'pairs' or 'trajectories' files")
    merged = None
    if pairs:
        merged = DerivativePairs(
            np.concatenate([p.states for p in pairs]),
            np.concatenate([p.derivatives for p in pairs]),
            None if pairs[0].inputs is None else np.concatenate([p.inputs for p in pairs]),
        )
    return trajectories, merged


def _resolve_configs(spec, trajectories, pairs):
    preset = spec.get("preset")
    model_dict = preset_model_spec(preset) if preset else {"kind": "sphnn"}
    train_dict = preset_train_config(preset, desk=False) if preset and get_preset(preset)["regime"] else {}
    model_dict.update(spec.get("model", {}))
    train_dict.update(spec.get("train", {}))
    regime = train_dict.get("regime", "derivative")
    source = pairs if regime == "derivative" else (trajectories[0] if trajectories else None)
    if source is None:
        raise ConfigurationError(f"{regime.capitalize()} fitting needs {'pairs' if regime == 'derivative' else 'trajectories'} data")
    augmented = int(train_dict.get("augmented_dims", 0))
    model_dict.setdefault("state_dim", source.state_dim + augmented)
    model_dict.setdefault("input_dim", source.input_dim)
    return preset, model_dict, train_dict


def _train_instance(index, model_dict, train_dict, finetune_dict, trajectories, pairs, normalizer, out, verify_samples):
    seed = int(model_dict.get("seed", 0)) + index
    model = build_model(ModelSpec.from_dict({**model_dict, "seed": seed}))
    cfg = TrainConfig.from_dict({**train_dict, "seed": seed})
    start = time.perf_counter()
    history = fit(model, pairs if cfg.regime == "derivative" else trajectories, cfg)
    if finetune_dict:
        stage = TrainConfig.from_dict({**train_dict, "final_learning_rate": None, **finetune_dict, "seed": seed})
        tuned = fit(model, trajectories if stage.regime == "trajectory" else pairs, stage)
        history.losses += tuned.losses
        history.step_times += tuned.step_times
        history.final_params = tuned.final_params
    seconds = time.perf_counter() - start

    directory = os.path.join(out, f"instance_{index:02d}")
    os.makedirs(directory, exist_ok=True)
    checkpoint_path = os.path.join(directory, "checkpoint.json")
    save_checkpoint(Checkpoint(model, normalizer, {"seed": seed, "train": cfg.to_dict()}), checkpoint_path)
    write_history_csv(history, os.path.join(directory, "history.csv"))
    verdict = None
    if model.has_hamiltonian:
        report = verify_stability(model, sample_count=verify_samples, seed=seed)
        write_json(report.to_dict(), os.path.join(directory, "stability.json"))
        verdict = report.verdict
    return {
        "seed": seed,
        "final_loss": history.losses[-1] if history.losses else None,
        "steps": len(history),
        "seconds": seconds,
        "verdict": verdict,
        "checkpoint": checkpoint_path,
    }


def cmd_train(spec):
    """
    Train one or more model instances and write checkpoints, loss histories,
    stability reports, ``summary.json`` and ``report.md``
    """
    out = _out_dir(spec, "run")
    trajectories, pairs = _load_training_data(spec)
    preset, model_dict, train_dict = _resolve_configs(spec, trajectories, pairs)
    model_dict.setdefault("seed", spec.seed)

    noise = float(spec.get("noise_percent", 0.0))
    if noise:
        if not trajectories:
            raise ConfigurationError("Noise injection applies to trajectory data")
        trajectories = [add_noise(traj, noise, spec.seed + i) for i, traj in enumerate(trajectories)]

    normalizer = None
    normalize = spec.get("normalize")
    if normalize is not None:
        normalizer = fit_normalizer(trajectories or [pairs], normalize.get("equilibrium"))
        trajectories = [normalizer.apply_trajectory(traj) for traj in trajectories]
        if pairs is not None:
            pairs = normalizer.apply_pairs(pairs)

    instances = int(spec.get("instances", 1))
    verify_samples = int(spec.get("verify_samples", DEFAULT_SAMPLES))
    finetune = spec.get("finetune")
    if finetune is None and preset and "finetune" in get_preset(preset) and trajectories:
        stage = get_preset(preset)["finetune"]
        finetune = {"regime": stage["regime"], "steps": stage["steps"], "learning_rate": stage["learning_rate"]}

    def run(index):
        return _train_instance(
            index, model_dict, train_dict, finetune, trajectories, pairs, normalizer, out, verify_samples
        )

    if instances > 1 and config.threads > 1:
        with ThreadPoolExecutor(max_workers=min(config.threads, instances)) as pool:
            results = list(pool.map(run, range(instances)))
    else:
        results = [run(i) for i in range(instances)]

    run_info = {
        "preset": preset,
        "model_spec": ModelSpec.from_dict(model_dict).to_dict(),
        "train_config": TrainConfig.from_dict(train_dict).to_dict(),
        "instances": results,
        "noise_percent": noise,
        "data": f"{len(trajectories)} trajectories" + (f", {len(pairs)} derivative pairs" if pairs else ""),
    }
    write_json(run_info, os.path.join(out, "summary.json"))
    report_path = generate_training_report(out, run_info)

    rows = [
        [i, r["seed"], f"{r['final_loss']:.4e}" if r["final_loss"] is not None else "-", r["verdict"] or "-"]
        for i, r in enumerate(results)
    ]
    print(tabulate(rows, headers=["Instance", "Seed", "Final loss", "Verdict"]))
    print(f"\n[OK] Report saved to: {report_path}")
    return run_info


# -- predict ------------------------------------------------------------------


def cmd_predict(spec):
    """
    Roll a checkpoint out with adaptive Tsit5 and write the predicted trajectory

    Observed states are written in physical units; augmented states follow as
    extra columns in model coordinates.
    """
    checkpoint = load_checkpoint(spec.require("checkpoint"))
    model, normalizer = checkpoint.model, checkpoint.normalizer
    reference = load_csv(spec.get("initial_from")) if spec.get("initial_from") else None
    if spec.get("initial_state") is not None:
        x0_obs = np.asarray(spec.get("initial_state"), dtype=np.float64)
    elif reference is not None:
        x0_obs = reference.states[0]
    else:
        raise ConfigurationError("Prediction needs 'initial_state' or 'initial_from'")
    times = _grid(spec.get("times")) if spec.get("times") is not None else _grid(spec.get("t_eval"))
    if times is None:
        if reference is None:
            raise ConfigurationError("Prediction needs 'times', 't_eval' or 'initial_from'")
        times = reference.times

    observed = x0_obs.size
    if observed > model.state_dim:
        raise DataError(f"Initial state has {observed} entries, model has {model.state_dim} states")
    x0 = np.zeros(model.state_dim)
    x0[:observed] = normalizer.apply(x0_obs) if normalizer is not None else x0_obs

    signal = None
    if model.input_dim:
        source = load_csv(spec.get("inputs")) if spec.get("inputs") else reference
        if source is None or source.input_dim != model.input_dim:
            raise DataError(f"Model needs {model.input_dim} input channel(s), got {0 if source is None else source.input_dim}")
        inputs = normalizer.apply_inputs(source.inputs) if normalizer is not None else source.inputs
        signal = InputSignal(source.times, inputs, spec.get("interpolation", "linear"))

    cfg = IntegrationConfig.from_dict(spec.get("integration", {}))
    result = integrate(model.numpy_rhs(), x0, times, signal, cfg)
    states = result.states.copy()
    if normalizer is not None:
        states[:, :observed] = normalizer.invert(states[:, :observed])
    inputs = None
    if signal is not None:
        inputs = normalizer.invert_inputs(result.inputs) if normalizer is not None else result.inputs
    prediction = Trajectory(times, states, inputs)

    path = _out_file(spec, "prediction.csv")
    save_csv(prediction, path)
    summary = {"prediction": path, "samples": len(prediction)}
    if spec.get("truth"):
        truth = load_csv(spec.get("truth"))
        observed_pred = Trajectory(times, states[:, :observed])
        summary["rmse"] = rmse(observed_pred, truth)
        print(f"RMSE vs truth: {summary['rmse']:.6e}")
    print(f"[OK] Prediction saved to: {path}")
    return summary


# -- eval ---------------------------------------------------------------------


def cmd_eval(spec):
    """
    RMSE of one or more predictions against the truth, with interquartile
    bands across predictions and optional rigid-body energy curves
    """
    out = _out_dir(spec, "eval")
    paths = spec.require("predictions")
    paths = [paths] if isinstance(paths, str) else paths
    truth = load_csv(spec.require("truth"))
    predictions = [load_csv(p) for p in paths]
    dims = spec.get("dims")
    dims = list(range(truth.state_dim)) if dims is None else list(dims)

    def observed(pred):
        return Trajectory(pred.times, pred.states[:, : truth.state_dim])

    per_prediction = []
    for path, pred in zip(paths, predictions):
        per_dim = rmse_per_dim(observed(pred), truth, dims)
        per_prediction.append(
            {"prediction": path, "rmse": rmse(observed(pred), truth, dims), "rmse_per_dim": per_dim.tolist()}
        )
    metrics = {"dims": dims, "per_prediction": per_prediction}
    totals = np.array([p["rmse"] for p in per_prediction])
    if len(predictions) > 1:
        iqm, q25, q75 = interquartile_summary(totals)
        metrics["rmse_iqm"] = float(iqm)
        metrics["rmse_q25"] = float(q25)
        metrics["rmse_q75"] = float(q75)
        stacked = np.stack([observed(p).states for p in predictions])
        iqm, q25, q75 = interquartile_summary(stacked, axis=0)
        header = ["t"]
        columns = [truth.times[:, None]]
        for d in range(truth.state_dim):
            header += [f"x{d + 1}_iqm", f"x{d + 1}_q25", f"x{d + 1}_q75"]
            columns += [iqm[:, d:d + 1], q25[:, d:d + 1], q75[:, d:d + 1]]
        metrics["bands"] = write_table_csv(os.path.join(out, "bands.csv"), header, np.hstack(columns).tolist())

    body = spec.get("spinning_body")
    if body is not None:
        inertia = body.get("inertia", DEFAULT_INERTIA)
        energies = [rigid_energy(observed(p).states, inertia) for p in predictions]
        header = ["t", "E_truth"] + [f"E_pred{i + 1}" for i in range(len(predictions))]
        columns = [truth.times, rigid_energy(truth.states, inertia)] + energies
        if len(predictions) > 1:
            iqm, q25, q75 = interquartile_summary(np.stack(energies), axis=0)
            header += ["E_iqm", "E_q25", "E_q75"]
            columns += [iqm, q25, q75]
        metrics["energy"] = write_table_csv(
            os.path.join(out, "energy.csv"), header, np.column_stack(columns).tolist()
        )

    write_json(metrics, os.path.join(out, "metrics.json"))
    print(format_metrics_table([os.path.basename(p) for p in paths], totals))
    return metrics


# -- verify -------------------------------------------------------------------


def cmd_verify(spec):
    """Stability report of a checkpoint, optionally with a boundedness probe"""
    checkpoint = load_checkpoint(spec.require("checkpoint"))
    model = checkpoint.model
    report = verify_stability(
        model,
        sample_count=int(spec.get("samples", DEFAULT_SAMPLES)),
        seed=spec.seed,
        box_halfwidth=float(spec.get("box_halfwidth", DEFAULT_BOX_HALFWIDTH)),
    )
    document = report.to_dict()
    probe = spec.get("probe")
    if probe is not None:
        result = boundedness_probe(
            model, radius=float(probe.get("radius", 10.0)), horizon=float(probe.get("horizon", 100.0)), seed=spec.seed
        )
        document["probe"] = vars(result)
    path = _out_file(spec, "stability.json")
    write_json(document, path)
    print(format_stability_table(report))
    print(f"\n[OK] Stability report saved to: {path}")
    return document


# -- decompose ----------------------------------------------------------------


def cmd_decompose(spec):
    """
    Conservative, dissipative and input contributions of the vector field on
    a grid over one or two state axes; other states are held at x*
    """
    checkpoint = load_checkpoint(spec.require("checkpoint"))
    model = checkpoint.model
    n = model.state_dim
    grid = spec.get("grid", {})
    axes = list(grid.get("axes", [0, 1] if n > 1 else [0]))
    if not 1 <= len(axes) <= 2 or any(a < 0 or a >= n for a in axes):
        raise ConfigurationError(f"Grid axes {axes} do not fit a model with {n} states")
    lower = grid.get("lower", [-3.0] * len(axes))
    upper = grid.get("upper", [3.0] * len(axes))
    points = grid.get("points", [21] * len(axes))
    if not len(lower) == len(upper) == len(points) == len(axes):
        raise ConfigurationError("Grid needs one lower, upper and points entry per axis")
    u = np.asarray(spec.get("input", [0.0] * model.input_dim), dtype=np.float64)

    base = model.equilibrium()
    mesh = np.meshgrid(*[np.linspace(lo, hi, p) for lo, hi, p in zip(lower, upper, points)], indexing="ij")
    coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
    rows = []
    for c in coords:
        x = base.copy()
        x[axes] = c
        conservative, dissipative, inputs = phs.decompose(model, x, u)
        dh = phs.grad_hamiltonian(model, x)
        total = conservative + dissipative + inputs
        rows.append(
            list(x) + list(conservative) + list(dissipative) + list(inputs) + list(total)
            + [phs.hamiltonian(model, x), float(dh @ conservative), float(dh @ dissipative)]
        )
    header = (
        [f"x{i + 1}" for i in range(n)] + [f"c{i + 1}" for i in range(n)] + [f"d{i + 1}" for i in range(n)]
        + [f"i{i + 1}" for i in range(n)] + [f"f{i + 1}" for i in range(n)] + ["H", "dH_c", "dH_d"]
    )
    path = _out_file(spec, "vector_field.csv")
    write_table_csv(path, header, [[float(v) for v in row] for row in rows])
    worst = max(abs(row[-2]) for row in rows)
    print(f"[OK] {len(rows)} grid points written to {path} (max |dH . conservative| = {worst:.2e})")
    return {"vector_field": path, "points": len(rows), "max_conservative_power": worst}


# -- pod ----------------------------------------------------------------------


def _fit_and_encode(snapshots_path, latent_dim, equilibrium_path, out, name):
    _, snapshots = load_table(snapshots_path)
    basis = pod_fit(snapshots, latent_dim)
    if equilibrium_path:
        _, equilibrium = load_table(equilibrium_path)
        basis = set_equilibrium(basis, equilibrium[0])
    header_path = save_basis(basis, out, name)
    latents = encode(basis, snapshots)
    latents_path = write_table_csv(
        os.path.join(out, f"{name}_latents.csv"),
        [f"z{i + 1}" for i in range(basis.latent_dim)],
        latents.tolist(),
    )
    error = reconstruction_error(basis, snapshots)
    s = basis.singular_values
    # relative Frobenius error of the best rank-n approximation
    bound = float(np.sqrt(np.sum(s[latent_dim:] ** 2) / np.sum(s**2)))
    return {
        "basis": header_path,
        "latents": latents_path,
        "latent_dim": basis.latent_dim,
        "scale": basis.scale,
        "reconstruction_error": error,
        "truncation_bound": bound,
    }


def cmd_pod(spec):
    """Fit state (and optional input) POD bases and encode the snapshots"""
    out = _out_dir(spec, "pod")
    summary = {
        "state": _fit_and_encode(
            spec.require("snapshots"),
            int(spec.get("latent_dim", DEFAULT_LATENT_DIM)),
            spec.get("equilibrium"),
            out,
            "basis",
        )
    }
    if spec.get("input_snapshots"):
        summary["input"] = _fit_and_encode(
            spec.get("input_snapshots"),
            int(spec.get("input_latent_dim", DEFAULT_LATENT_DIM)),
            None,
            out,
            "input_basis",
        )
    write_json(summary, os.path.join(out, "pod_summary.json"))
    rows = [[k, v["latent_dim"], f"{v['reconstruction_error']:.3e}", f"{v['truncation_bound']:.3e}"] for k, v in summary.items()]
    print(tabulate(rows, headers=["Basis", "n", "Reconstruction error", "Truncation bound"]))
    return summary


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "decompose": cmd_decompose,
    "pod": cmd_pod,
}
