"""Dense exact-diagonalization reference for small lattices.

This module is the oracle the phase-space methods are judged against, so it
stays deliberately simple: build the full many-body Hamiltonian in the
3^M-dimensional product basis, diagonalize it once, and evaluate expectation
curves from the spectral decomposition,

    |psi(t)> = V exp(-i Lambda t) V^dag |psi(0)>.

Sites are ordered most-significant-first in the Kronecker product and the
local basis is (|+1>, |0>, |-1>), matching the generator matrices in
:mod:`su3twa.algebra`.  The memory and eigh cost grow as 9^M, so M is capped
at 8 (dimension 6561, about 0.7 GB per dense complex matrix); anything larger
is the job of the trajectory sampler, not of this oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .algebra import LOCAL_DIM, default_generators
from .models import ModelSpec

#: largest site count the dense oracle accepts
ED_MAX_SITES = 8

OBSERVABLE_KINDS = ("sx_mean", "szsq_per_site", "rho_s")


def _check_sites(n_sites: int) -> None:
    if n_sites < 1:
        raise ValueError(f"n_sites must be positive, got {n_sites}")
    if n_sites > ED_MAX_SITES:
        raise ValueError(
            f"dense diagonalization is capped at {ED_MAX_SITES} sites"
            f" (requested {n_sites}, dimension 3**{n_sites});"
            " use the trajectory sampler for larger lattices"
        )


def _embed(op: np.ndarray, site: int, n_sites: int) -> sp.csr_matrix:
    """Place a single-site operator at ``site`` inside the product space."""
    left = sp.identity(LOCAL_DIM**site, format="csr", dtype=complex)
    right = sp.identity(LOCAL_DIM ** (n_sites - site - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def product_state(local: np.ndarray, n_sites: int) -> np.ndarray:
    """Kronecker power of a normalized local state, shape (3**n_sites,)."""
    _check_sites(n_sites)
    local = np.asarray(local, dtype=complex).reshape(LOCAL_DIM)
    if abs(np.linalg.norm(local) - 1.0) > 1e-12:
        raise ValueError("local state is not normalized")
    psi = local
    for _ in range(n_sites - 1):
        psi = np.kron(psi, local)
    return psi


def build_hamiltonian(model: ModelSpec) -> np.ndarray:
    """Dense many-body Hamiltonian of ``model``.

    The model's phase-space representation tag is irrelevant here; ED always
    solves the actual quantum problem.  Raises for more than 8 sites.
    """
    n = model.n_sites
    _check_sites(n)
    sx, sy, sz = default_generators().spin()
    szsq = sz @ sz
    dim = LOCAL_DIM**n
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for site in range(n):
        bx, by, bz = model.b[site]
        local = (
            -(bx * sx + by * sy + bz * sz)
            + 0.5 * model.u[site] * szsq
            - model.mu[site] * sz
        )
        h = h + _embed(local, site, n)
    if model.graph.n_bonds:
        sx_at = [_embed(sx, s, n) for s in range(n)]
        sy_at = [_embed(sy, s, n) for s in range(n)]
        for (i, j), w in zip(model.graph.bonds, model.graph.weights):
            h = h - w * (sx_at[i] @ sx_at[j] + sy_at[i] @ sy_at[j])
    herm = abs(h - h.conj().T)
    if herm.nnz and herm.max() > 1e-12:
        raise AssertionError("assembled Hamiltonian is not Hermitian")
    return h.toarray()


def build_observable(kind: str, n_sites: int) -> np.ndarray:
    """Dense many-body observable matching a phase-space observable name.

    * ``sx_mean``        (1/M) sum_i S_x,i
    * ``szsq_per_site``  (1/M) sum_i S_z,i^2
    * ``rho_s``          (1/M^2) sum_{i != j} S_i^+ S_j^-
    """
    _check_sites(n_sites)
    if kind not in OBSERVABLE_KINDS:
        raise ValueError(
            f"unknown observable '{kind}'; choices: {', '.join(OBSERVABLE_KINDS)}"
        )
    sx, sy, sz = default_generators().spin()
    n = n_sites
    if kind == "sx_mean":
        total = sum(_embed(sx, s, n) for s in range(n))
        op = total / n
    elif kind == "szsq_per_site":
        total = sum(_embed(sz @ sz, s, n) for s in range(n))
        op = total / n
    else:
        sp_plus = sx + 1j * sy
        plus_total = sum(_embed(sp_plus, s, n) for s in range(n))
        onsite = sum(_embed(sp_plus @ sp_plus.conj().T, s, n) for s in range(n))
        op = (plus_total @ plus_total.conj().T - onsite) / n**2
    return sp.csr_matrix(op).toarray()


@dataclass(frozen=True)
class EDResult:
    """Expectation curves from exact evolution."""

    times: np.ndarray
    values: np.ndarray  # (n_observables, n_times), real


def evolve_expectation(
    hamiltonian: np.ndarray,
    psi0: np.ndarray,
    observables: Sequence[np.ndarray],
    times: np.ndarray,
    overwrite_h: bool = False,
) -> EDResult:
    """Exact expectation values <psi(t)| O |psi(t)> on a time grid.

    Parameters
    ----------
    hamiltonian
        dense Hermitian matrix; with ``overwrite_h=True`` its buffer is
        reused as eigh workspace and the contents are destroyed, which saves
        one matrix copy at the largest sizes.
    psi0
        initial state, must be normalized to 1e-12.
    observables
        dense Hermitian matrices evaluated at every time.
    """
    h = np.asarray(hamiltonian)
    dim = h.shape[0]
    if h.shape != (dim, dim):
        raise ValueError(f"hamiltonian must be square, got shape {h.shape}")
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.shape != (dim,):
        raise ValueError(f"psi0 length {psi0.size} does not match dimension {dim}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"psi0 is not normalized (|psi0| = {norm!r})")
    obs = [np.asarray(o) for o in observables]
    for k, o in enumerate(obs):
        if o.shape != (dim, dim):
            raise ValueError(f"observable {k} has shape {o.shape}, expected {(dim, dim)}")
        scale = max(np.max(np.abs(o)), 1.0)
        if np.max(np.abs(o - o.conj().T)) > 1e-10 * scale:
            raise ValueError(f"observable {k} is not Hermitian")
    times = np.atleast_1d(np.asarray(times, dtype=float))

    energies, vectors = sla.eigh(h, overwrite_a=overwrite_h, driver="evd")
    coeff = vectors.conj().T @ psi0
    values = np.empty((len(obs), len(times)))
    for kt, t in enumerate(times):
        psi_t = vectors @ (np.exp(-1j * energies * t) * coeff)
        for ko, o in enumerate(obs):
            values[ko, kt] = np.vdot(psi_t, o @ psi_t).real
    return EDResult(times=times, values=values)
