"""Phase-space equations of motion and the fixed-step RK4 integrator.

Each site's generator expectations X evolve under the generalized Bloch
equations

    dX_a/dt = sum_bc f_abc h_b(X) X_c

with f the antisymmetric structure constants and h the effective field of
:func:`su3twa.models.effective_field`.  For the Hamiltonians in this package
h is supported on components (1, 2, 3, 8) in SU(3) and (1, 2, 3) in SU(2), so
the double contraction is evaluated as a few small matrix products per site
batch instead of a full tensor contraction.

The flow conserves the quadratic and cubic invariants

    C1 = sum_a X_a^2,    C2 = sum_abc d_abc X_a X_b X_c

site by site (:func:`casimir_values`); monitoring them is the cheapest global
integration check and is wired into the ensemble driver.

Integration uses classical RK4 with a fixed step.  Requested record times are
snapped to the nearest step multiple, which keeps the time grid exactly
reproducible; convergence is assessed by step halving rather than adaptive
control, see :func:`step_halving_deviation`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraTables, default_tables
from .models import ModelSpec, effective_field, neighbor_sum

#: generator indices (0-based) on which the effective field can be nonzero
FIELD_COMPONENTS = {"su2": (0, 1, 2), "su3": (0, 1, 2, 7)}


def _field_matrices(
    representation: str, tables: AlgebraTables
) -> list[tuple[int, np.ndarray]]:
    """Per-component contraction matrices: rhs_a += h_b * (x @ m_b)_a."""
    dim = 3 if representation == "su2" else 8
    out = []
    for b in FIELD_COMPONENTS[representation]:
        m = np.ascontiguousarray(tables.f[:dim, b, :dim].T)
        out.append((b, m))
    return out


def eom_rhs(
    model: ModelSpec, x: np.ndarray, tables: AlgebraTables | None = None
) -> np.ndarray:
    """Right-hand side of the generalized Bloch equations, shape like x."""
    if tables is None:
        tables = default_tables()
    return _rhs(model, np.asarray(x, dtype=float), _field_matrices(model.representation, tables))


def _rhs(
    model: ModelSpec, x: np.ndarray, mats: list[tuple[int, np.ndarray]]
) -> np.ndarray:
    h = effective_field(model, x)
    out = np.zeros_like(x)
    for b, m in mats:
        out += h[..., b, None] * (x @ m)
    return out


class Propagator:
    """RHS evaluator with preassembled constants and reusable buffers.

    When every site carries the same local term (the usual case), the
    state-independent field components collapse into one contraction matrix
    applied by a single batched matrix product.  Only the state-dependent
    pieces survive as separate terms: the bond coupling on components 1 and 2
    and the SU(2) anisotropy field, which is linear in X_3.  Models with
    site-dependent terms fall back to the generic per-component evaluation.

    The marching loops run hot over large trajectory batches, so
    :meth:`step_into` advances states in place through four preallocated
    work arrays instead of allocating ten temporaries per step.
    """

    def __init__(self, model: ModelSpec, tables: AlgebraTables | None = None):
        if tables is None:
            tables = default_tables()
        self.model = model
        self.mats = _field_matrices(model.representation, tables)
        self._bufs: tuple[np.ndarray, ...] | None = None
        uniform = (
            (model.b == model.b[0]).all()
            and (model.u == model.u[0]).all()
            and (model.mu == model.mu[0]).all()
        )
        if not uniform:
            self.m0 = None
            self.state_terms: list[tuple[str, int, np.ndarray]] = []
            return
        # the field at X = 0 is exactly the constant part of the field
        h0 = effective_field(model, np.zeros((model.n_sites, model.dim)))[0]
        self.m0 = np.ascontiguousarray(sum(h0[b] * m for b, m in self.mats))
        self.state_terms = []
        by_comp = dict(self.mats)
        if model.coupling is not None:
            self.state_terms.append(("bond", 0, by_comp[0]))
            self.state_terms.append(("bond", 1, by_comp[1]))
        if model.representation == "su2" and model.u[0] != 0.0:
            self.state_terms.append(("anisotropy", 2, by_comp[2]))

    def rhs_into(self, x: np.ndarray, out: np.ndarray, work: np.ndarray) -> None:
        """out = rhs(x); ``work`` is scratch of the same shape."""
        if self.m0 is None:
            out[:] = _rhs(self.model, x, self.mats)
            return
        np.matmul(x, self.m0, out=out)
        for kind, b, m in self.state_terms:
            if kind == "bond":
                hv = -neighbor_sum(self.model, x[..., b])
            else:
                hv = self.model.u[0] * x[..., b]
            np.matmul(x, m, out=work)
            work *= hv[..., None]
            out += work

    def _scratch(self, shape: tuple[int, ...]) -> tuple[np.ndarray, ...]:
        if self._bufs is None or self._bufs[0].shape != shape:
            self._bufs = tuple(np.empty(shape) for _ in range(4))
        return self._bufs

    def step_into(self, x: np.ndarray, dt: float) -> None:
        """Advance x by one classical RK4 step, in place."""
        k, xt, acc, work = self._scratch(x.shape)
        self.rhs_into(x, k, work)
        np.multiply(k, dt / 6.0, out=acc)
        acc += x
        np.multiply(k, 0.5 * dt, out=xt)
        xt += x
        self.rhs_into(xt, k, work)
        k *= dt / 3.0
        acc += k
        np.multiply(k, 1.5, out=xt)  # x + (dt/2) k2
        xt += x
        self.rhs_into(xt, k, work)
        k *= dt / 3.0
        acc += k
        np.multiply(k, 3.0, out=xt)  # x + dt k3
        xt += x
        self.rhs_into(xt, k, work)
        k *= dt / 6.0
        acc += k
        x[:] = acc


@dataclass(frozen=True)
class IntegrationResult:
    """Snapped record times and the states recorded there.

    ``states[k]`` is the phase-space configuration at ``times[k]`` with the
    same leading (batch) shape as the initial condition.
    """

    times: np.ndarray
    states: np.ndarray


def snap_record_times(record_times: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Map requested times onto integer step indices of the dt grid.

    Returns (indices, snapped_times).  Times must be nonnegative and strictly
    increasing after snapping; two requests landing on the same step are an
    error rather than a silent merge.
    """
    record_times = np.asarray(record_times, dtype=float)
    if record_times.ndim != 1 or len(record_times) == 0:
        raise ValueError("record_times must be a nonempty 1d array")
    if record_times[0] < 0:
        raise ValueError("record times must be nonnegative")
    if dt <= 0 or not np.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    idx = np.rint(record_times / dt).astype(int)
    if np.any(np.diff(idx) <= 0):
        raise ValueError(
            "record times are not strictly increasing on the integration grid;"
            f" dt = {dt} is too coarse for the requested spacing"
        )
    return idx, idx * dt


def integrate(
    model: ModelSpec,
    x0: np.ndarray,
    record_times: np.ndarray,
    dt: float,
    tables: AlgebraTables | None = None,
) -> IntegrationResult:
    """Propagate x0 with fixed-step RK4 and record at the snapped times.

    Parameters
    ----------
    x0
        initial points, shape (..., n_sites, dim); any batch shape works and
        is propagated in lockstep.
    record_times
        requested output times; they are snapped to multiples of dt.
    dt
        integration step.

    Trajectories that blow up propagate NaN silently here; consumers decide
    how to treat non-finite recorded states (see :mod:`su3twa.ensemble`).
    """
    if tables is None:
        tables = default_tables()
    x = np.array(x0, dtype=float)
    if x.ndim < 2 or x.shape[-2] != model.n_sites or x.shape[-1] != model.dim:
        raise ValueError(
            f"x0 shape {x.shape} does not match model"
            f" ({model.n_sites} sites, dim {model.dim})"
        )
    idx, times = snap_record_times(record_times, dt)
    prop = Propagator(model, tables)
    states = np.empty((len(idx),) + x.shape)
    want = {step: k for k, step in enumerate(idx)}
    if 0 in want:
        states[want[0]] = x
    with np.errstate(all="ignore"):
        for step in range(1, idx[-1] + 1):
            prop.step_into(x, dt)
            k = want.get(step)
            if k is not None:
                states[k] = x
    return IntegrationResult(times=times, states=states)


def casimir_values(
    x: np.ndarray, tables: AlgebraTables | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-site invariants (C1, C2) of SU(3) points, shapes x.shape[:-1].

    C1 = sum_a X_a^2 and C2 = sum_abc d_abc X_a X_b X_c.  Both are conserved
    by the exact flow for any Hamiltonian, which makes their drift a direct
    measure of integration error.
    """
    if tables is None:
        tables = default_tables()
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 8:
        raise ValueError("Casimir invariants are defined for 8-component points")
    c1 = (x * x).sum(-1)
    dxx = np.einsum("abc,...b,...c->...a", tables.d, x, x)
    c2 = (dxx * x).sum(-1)
    return c1, c2


def step_halving_deviation(
    model: ModelSpec,
    x0: np.ndarray,
    record_times: np.ndarray,
    dt: float,
    tables: AlgebraTables | None = None,
) -> float:
    """Max absolute state deviation between integrations at dt and dt/2.

    The half-step run is sampled on the same snapped grid, so the returned
    number estimates the discretization error of the dt run; for RK4 it
    shrinks by roughly 2**4 under further halving.
    """
    coarse = integrate(model, x0, record_times, dt, tables)
    fine = integrate(model, x0, coarse.times, dt / 2.0, tables)
    return float(np.max(np.abs(coarse.states - fine.states)))
