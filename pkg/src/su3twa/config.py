"""Run configuration: flat key = value files with [model]/[init]/[run] sections.

The format is deliberately minimal so configs stay diff-friendly and never
need a markup parser: section headers in brackets, one ``key = value`` per
line, ``#`` starts a comment.  Unknown sections or keys are hard errors (a
typo must never silently fall back to a default), and every parse error names
the offending line.

A parsed :class:`RunConfig` is fully explicit: experiment defaults are applied
during parsing, so rendering a config and parsing it back gives an identical
object (``parse_config(render_config(cfg)) == cfg``), which is also how runs
are stamped into CSV metadata for exact reproduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXPERIMENTS = ("single-spin", "fully-connected", "bose-hubbard", "custom")
LATTICES = ("single", "fully_connected", "cubic")
STATES = ("sx_plus_one", "sz_zero", "matrix")

#: observables accepted in a custom run
RUN_OBSERVABLES = ("sx_mean", "szsq_per_site", "rho_s", "casimir1", "casimir2", "energy")

#: connectedness of the periodic cubic lattice
CUBIC_Z = 6


class ConfigError(ValueError):
    """Invalid configuration text or values."""


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved run: experiment, model, initial state, sampling."""

    experiment: str
    lattice: str
    representation: str | None = None
    m: int | None = None
    l: int | None = None
    j: float | None = None
    jz_over_u: float | None = None
    jnz_over_u: float | None = None
    b: tuple[float, float, float] = (0.0, 0.0, 0.0)
    u: float = 1.0
    mu: float = 0.0
    state: str = "sx_plus_one"
    rho: tuple[tuple[complex, ...], ...] | None = None
    n_traj: int = 4000
    seed: int = 12345
    dt: float = 0.01
    t_final: float = 20.0
    n_record: int = 200
    workers: int = 1
    convergence_tol: float = 1e-6
    observables: tuple[str, ...] | None = None
    out: str | None = None


# key -> (section, parser); parsers raise ValueError on bad input
def _int(s: str) -> int:
    return int(s, 10)


def _float(s: str) -> float:
    x = float(s)
    if not np.isfinite(x):
        raise ValueError("value must be finite")
    return x


def _str(s: str) -> str:
    return s


_KEY_TABLE: dict[str, tuple[str, object]] = {
    "representation": ("model", _str),
    "lattice": ("model", _str),
    "m": ("model", _int),
    "l": ("model", _int),
    "j": ("model", _float),
    "jz_over_u": ("model", _float),
    "jnz_over_u": ("model", _float),
    "b_x": ("model", _float),
    "b_y": ("model", _float),
    "b_z": ("model", _float),
    "u": ("model", _float),
    "mu": ("model", _float),
    "state": ("init", _str),
    "rho_row_1": ("init", _str),
    "rho_row_2": ("init", _str),
    "rho_row_3": ("init", _str),
    "experiment": ("run", _str),
    "n_traj": ("run", _int),
    "seed": ("run", _int),
    "dt": ("run", _float),
    "t_final": ("run", _float),
    "n_record": ("run", _int),
    "workers": ("run", _int),
    "convergence_tol": ("run", _float),
    "observables": ("run", _str),
    "out": ("run", _str),
}

#: experiment-specific defaults layered over the dataclass defaults
_EXPERIMENT_DEFAULTS: dict[str, dict[str, object]] = {
    "single-spin": {"b": (0.0, 0.0, 1.0), "t_final": 20.0, "n_traj": 4000},
    "fully-connected": {"t_final": 50.0, "n_traj": 4000},
    "bose-hubbard": {"state": "sz_zero", "t_final": 10.0, "n_traj": 1000},
    "custom": {},
}

_EXPERIMENT_LATTICE = {
    "single-spin": "single",
    "fully-connected": "fully_connected",
    "bose-hubbard": "cubic",
}


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    """Flatten config text into key -> (raw value, line number)."""
    raw: dict[str, tuple[str, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in ("model", "init", "run"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{stripped}'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if section is None:
            raise ConfigError(f"line {lineno}: key '{key}' appears before any section")
        if key not in _KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        want_section, _ = _KEY_TABLE[key]
        if want_section != section:
            raise ConfigError(
                f"line {lineno}: key '{key}' belongs in [{want_section}], not [{section}]"
            )
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = (value, lineno)
    return raw


def _convert(raw: dict[str, tuple[str, int]]) -> dict[str, object]:
    out: dict[str, object] = {}
    for key, (value, lineno) in raw.items():
        _, parser = _KEY_TABLE[key]
        try:
            out[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from None
    return out


def _parse_rho(raw: dict[str, tuple[str, int]]) -> tuple[tuple[complex, ...], ...]:
    rows = []
    for r in (1, 2, 3):
        key = f"rho_row_{r}"
        if key not in raw:
            raise ConfigError(f"state = matrix requires key '{key}'")
        value, lineno = raw[key]
        parts = value.split(",")
        if len(parts) != 3:
            raise ConfigError(f"line {lineno}: '{key}' needs 3 comma-separated entries")
        try:
            rows.append(tuple(complex(p.strip().replace(" ", "")) for p in parts))
        except ValueError:
            raise ConfigError(f"line {lineno}: bad complex entry in '{key}'") from None
    return tuple(rows)


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate config text into a fully explicit RunConfig.

    ``experiment`` (usually from the CLI subcommand) overrides nothing: if the
    text also sets it, both must agree.  All experiment defaults are applied
    here; the returned object is complete.
    """
    raw = _parse_lines(text)
    values = _convert(raw)

    def lineof(key: str) -> str:
        return f"line {raw[key][1]}: " if key in raw else ""

    text_experiment = values.pop("experiment", None)
    if experiment is None:
        experiment = text_experiment
    elif text_experiment is not None and text_experiment != experiment:
        raise ConfigError(
            f"{lineof('experiment')}config says experiment ="
            f" {text_experiment!r} but {experiment!r} was requested"
        )
    if experiment is None:
        raise ConfigError("no experiment given (set it in [run] or via the subcommand)")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'")

    kwargs: dict[str, object] = dict(_EXPERIMENT_DEFAULTS[experiment])
    kwargs["experiment"] = experiment

    # lattice is dictated by the experiment except for custom runs
    if experiment == "custom":
        if "lattice" not in values:
            raise ConfigError("custom runs require 'lattice' in [model]")
        lattice = values.pop("lattice")
        if lattice not in LATTICES:
            raise ConfigError(
                f"{lineof('lattice')}unknown lattice '{lattice}';"
                f" choices: {', '.join(LATTICES)}"
            )
    else:
        if "lattice" in values:
            raise ConfigError(
                f"{lineof('lattice')}'lattice' is fixed to"
                f" '{_EXPERIMENT_LATTICE[experiment]}' by the {experiment} experiment"
            )
        lattice = _EXPERIMENT_LATTICE[experiment]
    kwargs["lattice"] = lattice

    rep = values.pop("representation", None)
    if experiment in ("single-spin", "fully-connected"):
        if rep is not None:
            raise ConfigError(
                f"{lineof('representation')}the {experiment} driver runs both"
                " representations; do not set 'representation'"
            )
    elif experiment == "bose-hubbard":
        if rep not in (None, "su3"):
            raise ConfigError(
                f"{lineof('representation')}the bose-hubbard driver is su3-only"
            )
        kwargs["representation"] = "su3"
    else:
        rep = rep or "su3"
        if rep not in ("su2", "su3"):
            raise ConfigError(f"{lineof('representation')}unknown representation '{rep}'")
        kwargs["representation"] = rep

    # field and on-site terms
    b = [0.0, 0.0, 0.0]
    if experiment == "single-spin":
        b[2] = 1.0
    for axis, key in enumerate(("b_x", "b_y", "b_z")):
        if key in values:
            b[axis] = values.pop(key)
    kwargs["b"] = tuple(b)
    for key in ("u", "mu"):
        if key in values:
            kwargs[key] = values.pop(key)

    # lattice size
    m = values.pop("m", None)
    l = values.pop("l", None)
    if lattice == "single":
        if m not in (None, 1):
            raise ConfigError(f"{lineof('m')}single-site runs cannot set m != 1")
        if l is not None:
            raise ConfigError(f"{lineof('l')}'l' only applies to the cubic lattice")
        kwargs["m"] = 1
    elif lattice == "fully_connected":
        if m is None:
            raise ConfigError("fully connected runs require 'm' in [model]")
        if m < 1:
            raise ConfigError(f"{lineof('m')}m must be positive, got {m}")
        if l is not None:
            raise ConfigError(f"{lineof('l')}'l' only applies to the cubic lattice")
        kwargs["m"] = m
    else:
        if l is None:
            raise ConfigError("cubic lattice runs require 'l' in [model]")
        if l < 1:
            raise ConfigError(f"{lineof('l')}l must be positive, got {l}")
        if m is not None:
            raise ConfigError(f"{lineof('m')}'m' only applies to fully connected runs")
        kwargs["l"] = l

    # coupling strength, exactly one spelling
    j = values.pop("j", None)
    jz = values.pop("jz_over_u", None)
    jnz = values.pop("jnz_over_u", None)
    if lattice == "single":
        if any(v is not None for v in (j, jz, jnz)):
            raise ConfigError("single-site runs take no coupling constant")
    elif lattice == "fully_connected":
        if jnz is not None:
            raise ConfigError(
                f"{lineof('jnz_over_u')}'jnz_over_u' is for the cubic lattice;"
                " use 'jz_over_u' or 'j'"
            )
        given = [v for v in (j, jz) if v is not None]
        if kwargs["m"] == 1:
            if jz is not None:
                raise ConfigError(
                    f"{lineof('jz_over_u')}jz_over_u is undefined for m = 1 (z = 0)"
                )
        elif len(given) != 1:
            raise ConfigError(
                "fully connected runs require exactly one of 'j' or 'jz_over_u'"
            )
        kwargs["j"] = j
        kwargs["jz_over_u"] = jz
    else:
        if jz is not None:
            raise ConfigError(
                f"{lineof('jz_over_u')}'jz_over_u' is for fully connected runs;"
                " use 'jnz_over_u' or 'j'"
            )
        given = [v for v in (j, jnz) if v is not None]
        if len(given) != 1:
            raise ConfigError(
                "cubic lattice runs require exactly one of 'j' or 'jnz_over_u'"
            )
        kwargs["j"] = j
        kwargs["jnz_over_u"] = jnz

    # initial state
    state = values.pop("state", kwargs.get("state", "sx_plus_one"))
    if state not in STATES:
        raise ConfigError(
            f"{lineof('state')}unknown state '{state}'; choices: {', '.join(STATES)}"
        )
    kwargs["state"] = state
    if state == "matrix":
        kwargs["rho"] = _parse_rho(raw)
    else:
        for r in (1, 2, 3):
            if f"rho_row_{r}" in raw:
                raise ConfigError(
                    f"{lineof(f'rho_row_{r}')}rho rows are only used with state = matrix"
                )
    for key in ("rho_row_1", "rho_row_2", "rho_row_3"):
        values.pop(key, None)

    # run section
    obs = values.pop("observables", None)
    if obs is not None:
        if experiment != "custom":
            raise ConfigError(
                f"{lineof('observables')}'observables' is only for custom runs"
            )
        names = tuple(part.strip() for part in obs.split(","))
        for name in names:
            if name not in RUN_OBSERVABLES:
                raise ConfigError(
                    f"{lineof('observables')}unknown observable '{name}';"
                    f" choices: {', '.join(RUN_OBSERVABLES)}"
                )
        kwargs["observables"] = names
    elif experiment == "custom":
        kwargs["observables"] = ("sx_mean",)

    for key in ("n_traj", "seed", "dt", "t_final", "n_record", "workers", "convergence_tol", "out"):
        if key in values:
            kwargs[key] = values.pop(key)

    assert not values, f"unconsumed keys: {sorted(values)}"

    cfg = RunConfig(**kwargs)
    _validate_numbers(cfg)
    return cfg


def _validate_numbers(cfg: RunConfig) -> None:
    if cfg.n_traj < 1:
        raise ConfigError(f"n_traj must be positive, got {cfg.n_traj}")
    if not 0 <= cfg.seed < 2**63:
        raise ConfigError("seed must be a nonnegative 63-bit integer")
    if cfg.dt <= 0:
        raise ConfigError(f"dt must be positive, got {cfg.dt}")
    if cfg.t_final <= 0:
        raise ConfigError(f"t_final must be positive, got {cfg.t_final}")
    if cfg.n_record < 2:
        raise ConfigError(f"n_record must be at least 2, got {cfg.n_record}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be positive, got {cfg.workers}")
    if cfg.convergence_tol <= 0:
        raise ConfigError("convergence_tol must be positive")


def bond_weight(cfg: RunConfig) -> float:
    """Per-bond coupling weight implied by the config.

    Fully connected: the Hamiltonian's ordered-pair sum -J sum_{n != m} means
    each unordered bond carries 2J, with J = j or jz_over_u * u / (m - 1).
    This function returns J itself (the graph builder doubles it).  Cubic:
    returns the nearest-neighbor weight Jbar = j or jnz_over_u * u / 6.
    """
    if cfg.lattice == "single":
        return 0.0
    if cfg.lattice == "fully_connected":
        if cfg.jz_over_u is not None:
            return cfg.jz_over_u * cfg.u / (cfg.m - 1)
        return cfg.j or 0.0
    if cfg.jnz_over_u is not None:
        return cfg.jnz_over_u * cfg.u / CUBIC_Z
    return cfg.j or 0.0


def render_config(cfg: RunConfig) -> str:
    """Canonical text form; parsing it back reproduces ``cfg`` exactly."""
    model_lines = []
    if cfg.experiment == "custom":
        model_lines.append(f"lattice = {cfg.lattice}")
        model_lines.append(f"representation = {cfg.representation}")
    if cfg.lattice == "fully_connected":
        model_lines.append(f"m = {cfg.m}")
    if cfg.lattice == "cubic":
        model_lines.append(f"l = {cfg.l}")
    for key, value in (("j", cfg.j), ("jz_over_u", cfg.jz_over_u), ("jnz_over_u", cfg.jnz_over_u)):
        if value is not None:
            model_lines.append(f"{key} = {value!r}")
    for axis, key in enumerate(("b_x", "b_y", "b_z")):
        model_lines.append(f"{key} = {cfg.b[axis]!r}")
    model_lines.append(f"u = {cfg.u!r}")
    model_lines.append(f"mu = {cfg.mu!r}")

    init_lines = [f"state = {cfg.state}"]
    if cfg.state == "matrix":
        for r, row in enumerate(cfg.rho, start=1):
            init_lines.append(f"rho_row_{r} = " + ", ".join(repr(z) for z in row))

    run_lines = [f"experiment = {cfg.experiment}"]
    run_lines.append(f"n_traj = {cfg.n_traj}")
    run_lines.append(f"seed = {cfg.seed}")
    run_lines.append(f"dt = {cfg.dt!r}")
    run_lines.append(f"t_final = {cfg.t_final!r}")
    run_lines.append(f"n_record = {cfg.n_record}")
    run_lines.append(f"workers = {cfg.workers}")
    run_lines.append(f"convergence_tol = {cfg.convergence_tol!r}")
    if cfg.observables is not None:
        run_lines.append("observables = " + ", ".join(cfg.observables))
    if cfg.out is not None:
        run_lines.append(f"out = {cfg.out}")

    chunks = ["[model]"] + model_lines + ["", "[init]"] + init_lines + ["", "[run]"] + run_lines
    return "\n".join(chunks) + "\n"
