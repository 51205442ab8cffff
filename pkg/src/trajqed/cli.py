"""Batch experiment runner.

``trajqed run --config FILE [--seed N] [--out-dir DIR]`` executes one of
the five experiment families described by the config file and writes a
CSV plus a JSON run manifest (config echo, effective seed, library
version, kernel backend and derived quantities).  ``trajqed validate
--config FILE`` checks a config without running anything.

Exit codes: 0 success, 2 validation failure, 3 numerical failure
(truncation leak, trace drift, degenerate channel probabilities).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, _kernels
from .atom_reservoir import (
    SchemeAParams,
    engineered_rates,
    quadrature_rotation,
    repeated_interaction_run,
)
from .config import ExperimentConfig, load_config
from .entanglement import protection_run
from .errors import (
    ConfigError,
    DegenerateStateError,
    IntegrationError,
    TruncationError,
    ValidationError,
)
from .liouville import LindbladModel, integrate
from .purcell_reservoir import (
    SchemeBParams,
    effective_jump_channels,
    effective_rates,
    reduced_compare,
)
from .qstate import (
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    StateVector,
    annihilation_op,
    basis_state,
    expectation,
    fock_state,
    number_op,
    trace_distance,
    transition_op,
)
from .unraveller import build_jump_channels, ensemble_average, mix_channels

FLOAT_FMT = ".17g"


def emit_csv(times, series: dict, path: str):
    """Write named time series as CSV (LF newlines, 17 significant digits).

    Complex-valued series are split into ``name_re`` / ``name_im``
    columns; the first column is always ``t``.  A round-trip parse of the
    file reproduces every float64 exactly.
    """
    times = np.asarray(times)
    columns = [("t", np.asarray(times, dtype=float))]
    for name, values in series.items():
        values = np.asarray(values)
        if values.shape[0] != times.shape[0]:
            raise ValidationError(f"series {name!r} length differs from time grid")
        if np.iscomplexobj(values):
            columns.append((f"{name}_re", values.real.astype(float)))
            columns.append((f"{name}_im", values.imag.astype(float)))
        else:
            columns.append((name, values.astype(float)))
    lines = [",".join(name for name, _ in columns)]
    for row in range(times.shape[0]):
        lines.append(",".join(format(col[row], FLOAT_FMT) for _, col in columns))
    payload = "\n".join(lines) + "\n"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(payload)


def _write_manifest(path, cfg: ExperimentConfig, seed, derived: dict, csv_path: str):
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.sections,
        "master_seed": seed,
        "version": __version__,
        "kernel_backend": _kernels.backend_name(),
        "derived": derived,
        "outputs": {"csv": os.path.basename(csv_path)},
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiment runners: each returns (times, series, derived)

def _qubit_model(gamma_minus, gamma_plus) -> LindbladModel:
    sm = transition_op(2, 0, 1)
    ham = OperatorMatrix(sm.layout, np.zeros((2, 2), dtype=np.complex128))
    return LindbladModel(ham, ((gamma_minus, sm), (gamma_plus, sm.dag())))


def _field_model(gamma_minus, gamma_plus, n_trunc) -> LindbladModel:
    a = annihilation_op(n_trunc)
    ham = OperatorMatrix(a.layout, np.zeros((n_trunc, n_trunc), dtype=np.complex128))
    return LindbladModel(ham, ((gamma_minus, a), (gamma_plus, a.dag())))


def _run_master(cfg: ExperimentConfig, seed):
    p = cfg.params
    times = cfg.grid.sample_times()
    if p["system"] == "field":
        model = _field_model(p["gamma_minus"], p["gamma_plus"], p["n_trunc"])
        rho0 = fock_state(p["n_trunc"], p["initial_fock"]).projector()
        states = integrate(model, rho0, times, cfg.grid.dt)
        nop = number_op(p["n_trunc"])
        series = {
            "n_mean": np.array([expectation(st, nop).real for st in states]),
            "top_pop": np.array([st.populations()[-1] for st in states]),
        }
    else:
        model = _qubit_model(p["gamma_minus"], p["gamma_plus"])
        level = 1 if p["initial_level"] == "e" else 0
        rho0 = basis_state(HilbertLayout((2,)), (level,)).projector()
        states = integrate(model, rho0, times, cfg.grid.dt)
        series = {
            "p_g": np.array([st.populations()[0] for st in states]),
            "p_e": np.array([st.populations()[1] for st in states]),
            "coh": np.array([st.entries[0, 1] for st in states]),
        }
    return times, series, {}


def _run_trajectories(cfg: ExperimentConfig, seed):
    p = cfg.params
    sm = transition_op(2, 0, 1)
    cs = build_jump_channels([(p["gamma_minus"], sm), (p["gamma_plus"], sm.dag())],
                             cfg.grid.dt)
    if cfg.mixing is not None:
        cs = mix_channels(cs, cfg.mixing)
    level = 1 if p["initial_level"] == "e" else 0
    psi0 = basis_state(HilbertLayout((2,)), (level,))
    result = ensemble_average(cs, psi0, cfg.n_traj, cfg.grid.t_final, seed,
                              sample_every=cfg.grid.sample_every)
    master = integrate(_qubit_model(p["gamma_minus"], p["gamma_plus"]),
                       psi0.projector(), result.times, cfg.grid.dt * cfg.grid.sample_every)
    td = np.array([trace_distance(avg, ref) for avg, ref in zip(result.states, master)])
    series = {
        "p_g": np.array([st.populations()[0] for st in result.states]),
        "p_e": np.array([st.populations()[1] for st in result.states]),
        "coh": np.array([st.entries[0, 1] for st in result.states]),
        "td_master": td,
    }
    derived = {"sup_trace_distance_to_master": float(td.max()), "n_traj": cfg.n_traj}
    return result.times, series, derived


def _run_scheme_a(cfg: ExperimentConfig, seed):
    p = cfg.params
    params = SchemeAParams(lambda1=p["lambda1"], lambda2=p["lambda2"], dt1=p["dt1"],
                           dt2=p["dt2"], r=p["r"], n_trunc=p["n_trunc"])
    if p["rotation"] == "identity":
        rot = np.eye(3, dtype=np.complex128)
    elif p["rotation"] == "quadrature":
        rot = quadrature_rotation()
    else:
        rot = p["rotation_matrix"]
    gamma_plus, gamma_minus = engineered_rates(params)
    derived = {
        "engineered_gamma_plus": gamma_plus,
        "engineered_gamma_minus": gamma_minus,
    }
    if gamma_minus > gamma_plus:
        derived["steady_n_bar"] = gamma_plus / (gamma_minus - gamma_plus)
    field0 = fock_state(p["n_trunc"], p["initial_fock"])
    if p["mode"] == "traced":
        times, states = repeated_interaction_run(
            params, rot, field0, p["n_atoms"], mode="traced",
            sample_every=p["sample_every"],
        )
        nop = number_op(p["n_trunc"])
        series = {
            "n_mean": np.array([expectation(st, nop).real for st in states]),
            "top_pop": np.array([st.populations()[-1] for st in states]),
        }
        return times, series, derived
    record = repeated_interaction_run(
        params, rot, field0, p["n_atoms"], seed=seed, mode="monitored",
        sample_every=p["sample_every"],
    )
    series = dict(record.observables)
    if p["sample_every"] == 1:
        # outcome of the atom measured between t_{j-1} and t_j; -1 on the first row
        series["outcome"] = np.concatenate(([-1.0], record.outcomes.astype(float)))
    return record.times, series, derived


def _run_scheme_b(cfg: ExperimentConfig, seed):
    p = cfg.params
    params = SchemeBParams(
        kappa=p["kappa"], lambda_ge=p["lambda_ge"], lambda_ie=p["lambda_ie"],
        omega_drive=p["omega_drive"], gamma_nat=p["gamma_nat"], Gamma_nat=p["Gamma_nat"],
        delta_ge=p["delta_ge"], n_trunc_R=p["n_trunc_R"], n_trunc_L=p["n_trunc_L"],
    )
    gm, gp, gie = effective_rates(params)
    times = cfg.grid.sample_times()
    rho0 = basis_state(HilbertLayout((3,)), (1,)).projector()
    comp = reduced_compare(params, rho0, times, step_full=cfg.grid.dt)
    series = {
        "p_g": comp.qubit_blocks[:, 0, 0].real,
        "p_e": comp.qubit_blocks[:, 1, 1].real,
        "p_i": comp.i_populations,
        "p_e_eff": np.array([st.populations()[1] for st in comp.effective_states]),
        "trace_distance": comp.trace_distances,
    }
    derived = {
        "effective_gamma_minus": gm,
        "effective_gamma_plus": gp,
        "effective_gamma_ie": gie,
        "max_trace_distance": comp.max_trace_distance,
        "max_i_population": comp.max_i_population,
        "max_top_pop_R": comp.max_top_pop_R,
        "max_top_pop_L": comp.max_top_pop_L,
    }
    return times, series, derived


def _run_protection(cfg: ExperimentConfig, seed):
    p = cfg.params
    result = protection_run(p["gamma"], cfg.grid.t_final, cfg.n_traj, seed,
                            dt=cfg.grid.dt, sample_every=cfg.grid.sample_every)
    td = np.array([
        trace_distance(avg, ref)
        for avg, ref in zip(result.ensemble_states, result.master_states)
    ])
    series = {
        "conc_master": result.master_concurrence,
        "conc_traj_min": result.trajectory_concurrence.min(axis=0),
        "conc_traj_mean": result.trajectory_concurrence.mean(axis=0),
        "conc_traj_max": result.trajectory_concurrence.max(axis=0),
        "td_ensemble_master": td,
    }
    derived = {
        "entanglement_lost_time": result.entanglement_lost_time,
        "min_trajectory_concurrence": float(result.trajectory_concurrence.min()),
        "n_traj": cfg.n_traj,
    }
    return result.times, series, derived


_RUNNERS = {
    "master": _run_master,
    "trajectories": _run_trajectories,
    "scheme_a": _run_scheme_a,
    "scheme_b": _run_scheme_b,
    "protection": _run_protection,
}


def run_experiment(cfg: ExperimentConfig, seed_override=None, out_dir=None) -> int:
    """Execute a validated config; returns the process exit code."""
    seed = seed_override if seed_override is not None else cfg.master_seed
    csv_path = cfg.csv_path
    if out_dir is not None and not os.path.isabs(csv_path):
        csv_path = os.path.join(out_dir, csv_path)
    parent = os.path.dirname(os.path.abspath(csv_path))
    if not os.path.isdir(parent):
        print(f"error: output directory does not exist: {parent}", file=sys.stderr)
        return 2
    try:
        times, series, derived = _RUNNERS[cfg.experiment](cfg, seed)
    except (TruncationError, IntegrationError, DegenerateStateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    emit_csv(times, series, csv_path)
    _write_manifest(csv_path + ".manifest.json", cfg, seed, derived, csv_path)
    print(f"wrote {csv_path} and manifest")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajqed",
        description="Run monitored/unmonitored reservoir-engineering experiments "
                    "described by a config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="validate a config and run the experiment")
    run_p.add_argument("--config", required=True, help="path to the INI config file")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the master seed from the config")
    run_p.add_argument("--out-dir", default=None,
                       help="directory prefixed to relative output paths")
    val_p = sub.add_parser("validate", help="check a config file without running")
    val_p.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {args.config} describes a valid {cfg.experiment!r} run")
        return 0
    return run_experiment(cfg, seed_override=args.seed, out_dir=args.out_dir)


if __name__ == "__main__":
    sys.exit(main())
