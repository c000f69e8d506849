"""Command line front end.

Subcommands map one-to-one onto the scenarios the package is built to
reproduce:

* ``validate-algebra``   recompute structure constants, diff against the
  reference tables, and run the Casimir-conservation arbitration.
* ``single-spin``        one interacting spin in a field: SU(3) TWA, SU(2)
  TWA and exact diagonalization side by side.
* ``fully-connected``    all-to-all coupled spins: both TWA flavors plus ED
  up to 8 sites.
* ``bose-hubbard``       quench on the periodic cubic lattice, SU(3) TWA.
* ``custom``             one representation, any lattice, chosen observables.

Each run writes a single CSV whose ``#`` header embeds the package version,
a hash of the canonical config, and the config itself, so any output file can
be reproduced exactly from its own header.  Exit codes: 0 success, 1 config
error, 2 runtime error, 3 validation mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .algebra import (
    REFERENCE_D,
    REFERENCE_F,
    AlgebraTables,
    build_generator_set,
    compare_with_reference,
    default_tables,
    structure_constants,
)
from .config import (
    ConfigError,
    RunConfig,
    _validate_numbers,
    bond_weight,
    parse_config,
    render_config,
)
from .dynamics import casimir_values, integrate
from .ensemble import EnsembleConfig, RunResult, run_ensemble, trajectory_rng
from .exact import ED_MAX_SITES, build_hamiltonian, build_observable, evolve_expectation, product_state
from .models import (
    CouplingGraph,
    ModelSpec,
    cubic_lattice_graph,
    fully_connected_graph,
    single_site_graph,
    uniform_model,
)
from .wigner import GaussianMoments, GaussianSampler, moments_from_density, named_density, restrict_su2, replicate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3

#: column label per observable kind
_LABEL = {
    "sx_mean": "sx",
    "szsq_per_site": "szsq",
    "rho_s": "rhos",
    "casimir1": "casimir1",
    "casimir2": "casimir2",
    "energy": "energy",
}

#: trajectories probed by the step-halving convergence check
_PROBE_TRAJECTORIES = 4


def build_graph(cfg: RunConfig) -> CouplingGraph:
    if cfg.lattice == "single":
        return single_site_graph()
    if cfg.lattice == "fully_connected":
        return fully_connected_graph(cfg.m, bond_weight(cfg))
    return cubic_lattice_graph(cfg.l, bond_weight(cfg))


def build_model(cfg: RunConfig, representation: str) -> ModelSpec:
    return uniform_model(representation, build_graph(cfg), b_field=cfg.b, u=cfg.u, mu=cfg.mu)


def initial_density(cfg: RunConfig) -> np.ndarray:
    if cfg.state == "matrix":
        return np.array(cfg.rho, dtype=complex)
    return named_density(cfg.state)


def initial_pure_vector(cfg: RunConfig) -> np.ndarray:
    """Local state vector for the ED oracle; mixed matrix states are refused."""
    rho = initial_density(cfg)
    lam, vec = np.linalg.eigh(rho)
    if lam[-1] < 1.0 - 1e-10:
        raise RuntimeError(
            "exact diagonalization needs a pure initial state;"
            f" largest eigenvalue of rho is {lam[-1]:.6f}"
        )
    return vec[:, -1]


def record_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_final, cfg.n_record)


def site_moments(cfg: RunConfig, representation: str, n_sites: int) -> GaussianMoments:
    moments = moments_from_density(initial_density(cfg))
    if representation == "su2":
        moments = restrict_su2(moments)
    return replicate(moments, n_sites)


def convergence_report(cfg: RunConfig, model: ModelSpec, moments: GaussianMoments) -> float:
    """Step-halving deviation on a small probe batch of real trajectories.

    Probes the run's own initial samples (streams 0..3) through the full
    nonlinear flow at dt and dt/2; the max state deviation estimates the
    discretization error of the production step.
    """
    sampler = GaussianSampler(moments)
    n_probe = min(_PROBE_TRAJECTORIES, cfg.n_traj)
    x0 = np.stack([sampler.draw(trajectory_rng(cfg.seed, k)) for k in range(n_probe)])
    times = record_grid(cfg)
    coarse = integrate(model, x0, times, cfg.dt)
    fine = integrate(model, x0, coarse.times, cfg.dt / 2.0)
    dev = float(np.max(np.abs(coarse.states - fine.states)))
    if not np.isfinite(dev) or dev > cfg.convergence_tol:
        raise RuntimeError(
            f"integrator not converged: step-halving deviation {dev:.3e}"
            f" exceeds convergence_tol = {cfg.convergence_tol:.3e}; reduce dt"
        )
    return dev


def ensemble_config(cfg: RunConfig) -> EnsembleConfig:
    return EnsembleConfig(n_traj=cfg.n_traj, seed=cfg.seed, dt=cfg.dt, workers=cfg.workers)


def ed_curves(
    cfg: RunConfig, n_sites: int, kinds: tuple[str, ...], times: np.ndarray
) -> np.ndarray:
    """Exact expectation curves, shape (len(kinds), len(times))."""
    model = build_model(cfg, "su3")
    h = build_hamiltonian(model)
    psi0 = product_state(initial_pure_vector(cfg), n_sites)
    observables = [build_observable(kind, n_sites) for kind in kinds]
    result = evolve_expectation(h, psi0, observables, times, overwrite_h=True)
    return result.values


class Curve:
    """One output column pair: label, mean series, sem series."""

    def __init__(self, label: str, mean: np.ndarray, sem: np.ndarray | None = None):
        self.label = label
        self.mean = np.asarray(mean, dtype=float)
        self.sem = np.zeros_like(self.mean) if sem is None else np.asarray(sem, dtype=float)


def _ensemble_curves(result: RunResult, prefix: str) -> list[Curve]:
    return [
        Curve(f"{prefix}_{_LABEL[kind]}", result.mean[j], result.sem[j])
        for j, kind in enumerate(result.names)
    ]


def driver_single_spin(cfg: RunConfig) -> tuple[np.ndarray, list[Curve], dict]:
    kinds = ("sx_mean",)
    model3 = build_model(cfg, "su3")
    model2 = build_model(cfg, "su2")
    dev = convergence_report(cfg, model3, site_moments(cfg, "su3", 1))
    su3 = run_ensemble(model3, site_moments(cfg, "su3", 1), kinds, record_grid(cfg), ensemble_config(cfg))
    su2 = run_ensemble(model2, site_moments(cfg, "su2", 1), kinds, record_grid(cfg), ensemble_config(cfg))
    ed = ed_curves(cfg, 1, kinds, su3.times)
    curves = _ensemble_curves(su3, "su3") + _ensemble_curves(su2, "su2")
    curves.append(Curve("ed_sx", ed[0]))
    meta = {
        "step_halving_deviation": dev,
        "casimir_max_drift": su3.metadata["casimir_max_drift"],
        "n_failed_su3": su3.metadata["n_failed"],
        "n_failed_su2": su2.metadata["n_failed"],
    }
    return su3.times, curves, meta


def driver_fully_connected(cfg: RunConfig) -> tuple[np.ndarray, list[Curve], dict]:
    kinds = ("szsq_per_site",)
    model3 = build_model(cfg, "su3")
    model2 = build_model(cfg, "su2")
    dev = convergence_report(cfg, model3, site_moments(cfg, "su3", cfg.m))
    su3 = run_ensemble(
        model3, site_moments(cfg, "su3", cfg.m), kinds, record_grid(cfg), ensemble_config(cfg)
    )
    su2 = run_ensemble(
        model2, site_moments(cfg, "su2", cfg.m), kinds, record_grid(cfg), ensemble_config(cfg)
    )
    curves = _ensemble_curves(su3, "su3") + _ensemble_curves(su2, "su2")
    meta = {
        "step_halving_deviation": dev,
        "casimir_max_drift": su3.metadata["casimir_max_drift"],
        "n_failed_su3": su3.metadata["n_failed"],
        "n_failed_su2": su2.metadata["n_failed"],
    }
    if cfg.m <= ED_MAX_SITES:
        ed = ed_curves(cfg, cfg.m, kinds, su3.times)
        curves.append(Curve("ed_szsq", ed[0]))
        meta["ed"] = "included"
    else:
        meta["ed"] = f"skipped (m > {ED_MAX_SITES})"
    return su3.times, curves, meta


def driver_bose_hubbard(cfg: RunConfig) -> tuple[np.ndarray, list[Curve], dict]:
    kinds = ("szsq_per_site", "rho_s")
    model = build_model(cfg, "su3")
    moments = site_moments(cfg, "su3", model.n_sites)
    dev = convergence_report(cfg, model, moments)
    su3 = run_ensemble(model, moments, kinds, record_grid(cfg), ensemble_config(cfg))
    meta = {
        "step_halving_deviation": dev,
        "casimir_max_drift": su3.metadata["casimir_max_drift"],
        "n_failed": su3.metadata["n_failed"],
    }
    return su3.times, _ensemble_curves(su3, "su3"), meta


def driver_custom(cfg: RunConfig) -> tuple[np.ndarray, list[Curve], dict]:
    rep = cfg.representation
    model = build_model(cfg, rep)
    moments = site_moments(cfg, rep, model.n_sites)
    dev = convergence_report(cfg, model, moments)
    result = run_ensemble(model, moments, cfg.observables, record_grid(cfg), ensemble_config(cfg))
    meta = {
        "step_halving_deviation": dev,
        "n_failed": result.metadata["n_failed"],
    }
    if rep == "su3":
        meta["casimir_max_drift"] = result.metadata["casimir_max_drift"]
    return result.times, _ensemble_curves(result, rep), meta


_DRIVERS = {
    "single-spin": driver_single_spin,
    "fully-connected": driver_fully_connected,
    "bose-hubbard": driver_bose_hubbard,
    "custom": driver_custom,
}


def format_csv(
    cfg: RunConfig, times: np.ndarray, curves: list[Curve], extra: dict
) -> str:
    """Render the full CSV text (metadata comments, header, data rows).

    The embedded config is normalized (output path dropped, worker count
    reset to 1) so the bytes, including the hash, depend only on what was
    computed; neither field changes any number in the file.
    """
    canonical = render_config(replace(cfg, out=None, workers=1))
    digest = hashlib.sha256(canonical.encode()).hexdigest()[:12]
    units = "U" if cfg.u != 0 else "J"
    lines = [
        f"# su3twa {__version__}",
        f"# config_hash = {digest}",
        f"# units: energies in {units}, time in 1/{units}",
    ]
    for key in sorted(extra):
        lines.append(f"# {key} = {extra[key]}")
    lines.append("# exact config follows; parse the indented block to re-run")
    for raw in canonical.splitlines():
        lines.append(f"#   {raw}")
    header = ["time"]
    for curve in curves:
        header.append(f"{curve.label}_mean")
        header.append(f"{curve.label}_sem")
    lines.append(",".join(header))
    for k, t in enumerate(times):
        row = [repr(float(t))]
        for curve in curves:
            row.append(repr(float(curve.mean[k])))
            row.append(repr(float(curve.sem[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def run_experiment(cfg: RunConfig, out_path: str) -> None:
    times, curves, extra = _DRIVERS[cfg.experiment](cfg)
    text = format_csv(cfg, times, curves, extra)
    with open(out_path, "w") as fh:
        fh.write(text)


def validate_algebra(out=None) -> int:
    """Recompute the structure constants, diff them, arbitrate d_888."""
    out = out or sys.stdout

    def emit(msg: str) -> None:
        print(msg, file=out)

    gens = build_generator_set()
    t = gens.matrices
    norm_dev = np.max(np.abs(np.einsum("aij,bji->ab", t, t) - 2.0 * np.eye(8)))
    herm_dev = max(np.max(np.abs(m - m.conj().T)) for m in t)
    trace_dev = max(abs(np.trace(m)) for m in t)
    emit(f"tr(T_a T_b) = 2 delta_ab:   max deviation {norm_dev:.2e}")
    emit(f"hermiticity:                max deviation {herm_dev:.2e}")
    emit(f"tracelessness:              max deviation {trace_dev:.2e}")

    tables = structure_constants(gens)
    f, d = tables.f, tables.d
    comm = np.einsum("aij,bjk->abik", t, t) - np.einsum("bij,ajk->abik", t, t)
    closure = np.max(np.abs(comm - 1j * np.einsum("abc,cij->abij", f, t)))
    emit(f"closure [T_a,T_b] = i f T:  max residual {closure:.2e}")
    jacobi = np.max(
        np.abs(
            np.einsum("abe,ecd->abcd", f, f)
            + np.einsum("bce,ead->abcd", f, f)
            + np.einsum("cae,ebd->abcd", f, f)
        )
    )
    emit(f"Jacobi identity:            max residual {jacobi:.2e}")

    f_diffs, d_diffs = compare_with_reference(tables)
    emit(f"\nf table ({len(REFERENCE_F)} listed independent entries):")
    for (a, b, c), want in sorted(REFERENCE_F.items()):
        got = f[a - 1, b - 1, c - 1]
        emit(f"  f_{a}{b}{c} = {got:+.12f}   listed {want:+.12f}")
    if f_diffs:
        for diff in f_diffs:
            a, b, c = diff.index
            emit(f"  MISMATCH f_{a}{b}{c}: computed {diff.computed:+.12f}, listed {diff.reference:+.12f}")
    else:
        emit("  all f entries match the listed table exactly")

    emit(f"\nd table ({len(REFERENCE_D)} listed independent entries):")
    for (a, b, c), want in sorted(REFERENCE_D.items()):
        got = d[a - 1, b - 1, c - 1]
        flag = "" if abs(got - want) < 1e-12 else "   <-- differs from listing"
        emit(f"  d_{a}{b}{c} = {got:+.12f}   listed {want:+.12f}{flag}")

    emit("\nCasimir arbitration for the d_888 sign:")
    drift_trace = _casimir_drift_with(d)
    d_flipped = d.copy()
    d_flipped[7, 7, 7] = -d_flipped[7, 7, 7]
    drift_flipped = _casimir_drift_with(d_flipped)
    emit(f"  trace value d_888 = {d[7, 7, 7]:+.6f}: max relative C2 drift {drift_trace:.2e}")
    emit(f"  flipped sign d_888 = {d_flipped[7, 7, 7]:+.6f}: max relative C2 drift {drift_flipped:.2e}")
    conserved = drift_trace < 1e-8 and drift_flipped > 1e-3
    if conserved:
        emit("  the trace-derived sign conserves C2; keeping it")
    else:
        emit("  WARNING: arbitration inconclusive")

    basic_ok = max(norm_dev, herm_dev, trace_dev, closure, jacobi) < 1e-10
    if f_diffs or not basic_ok or not conserved:
        emit("\nresult: VALIDATION MISMATCH")
        return EXIT_VALIDATION
    if d_diffs:
        entries = ", ".join("d_%d%d%d" % diff.index for diff in d_diffs)
        emit(f"\nresult: ok; d differs from the listing only in {entries} (documented)")
    else:
        emit("\nresult: ok")
    return EXIT_OK


def _casimir_drift_with(d_tensor: np.ndarray) -> float:
    """Max relative C2 drift of a small coupled model under a given d table.

    The flow itself only involves f, so both sign candidates are checked on
    the same trajectory; only the conserved-quantity definition changes.
    """
    tables = default_tables()
    probe = AlgebraTables(f=tables.f, d=d_tensor)
    model = uniform_model("su3", fully_connected_graph(3, 0.3), u=1.0)
    rng = np.random.default_rng(7)
    x0 = rng.normal(size=(3, 8))
    result = integrate(model, x0, np.linspace(0.0, 5.0, 6), 0.002, tables)
    _, c2 = casimir_values(result.states, probe)
    scale = np.maximum(np.abs(c2[0]), 1.0)
    return float(np.max(np.abs(c2 - c2[0]) / scale))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="su3twa",
        description="Truncated Wigner simulation of lattice spin-one systems",
    )
    parser.add_argument("--version", action="version", version=f"su3twa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate-algebra", help="check structure constants and exit")
    for name in _DRIVERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--out", help="output CSV path (default <experiment>.csv)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--ntraj", type=int, help="override the trajectory count")
        p.add_argument("--dt", type=float, help="override the integration step")
    args = parser.parse_args(argv)

    if args.command == "validate-algebra":
        return validate_algebra()

    try:
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
        else:
            text = ""
        cfg = parse_config(text, experiment=args.command)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.ntraj is not None:
            overrides["n_traj"] = args.ntraj
        if args.dt is not None:
            overrides["dt"] = args.dt
        if args.out is not None:
            overrides["out"] = args.out
        if overrides:
            cfg = replace(cfg, **overrides)
            _validate_numbers(cfg)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_path = cfg.out or f"{cfg.experiment}.csv"
    try:
        run_experiment(cfg, out_path)
    except (RuntimeError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {out_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
