"""Moment-matched Gaussian Wigner functions for spin-one sites.

A quantum state rho of a single spin-one site is mapped to the Gaussian
distribution over phase-space points X in R^8 that reproduces its first and
(symmetrized) second generator moments,

    mean_a  = tr(rho T_a)
    cov_ab  = tr(rho {T_a, T_b} / 2) - mean_a mean_b

Sampling from this Gaussian and averaging Weyl symbols over trajectories is
what turns the classical phase-space flow into an approximation of quantum
dynamics.  Pure states typically give rank-deficient covariances (for the
polarized state |S_x = +1> the eigenvalues are 1, 1, 1, 1, 0, 0, 0, 0), so
the sampler works through an eigendecomposition rather than a Cholesky
factorization and tolerates tiny negative eigenvalues from roundoff.

The SU(2) baseline uses the same machinery restricted to the first three
components (the ordinary spin expectation values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import LOCAL_DIM, N_GEN, GeneratorSet, default_generators

#: eigenvalues of a matched covariance below this are a hard error, above it
#: (but negative) they are treated as roundoff and clamped to zero
NEGATIVE_EIG_TOL = -1e-10

SU2_DIM = 3
SU3_DIM = N_GEN


@dataclass(frozen=True)
class GaussianMoments:
    """First and second moments of a (multi-site product) Wigner Gaussian.

    Attributes
    ----------
    mean
        array of shape (n_sites, dim) with dim 3 (SU(2)) or 8 (SU(3)).
    cov
        array of shape (n_sites, dim, dim); each site's block must be
        symmetric.  Cross-site covariances are zero by construction, so they
        are not stored.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        if mean.ndim != 2 or cov.ndim != 3:
            raise ValueError("mean must be (n_sites, dim), cov (n_sites, dim, dim)")
        n, dim = mean.shape
        if dim not in (SU2_DIM, SU3_DIM):
            raise ValueError(f"dim must be 3 or 8, got {dim}")
        if cov.shape != (n, dim, dim):
            raise ValueError(
                f"cov shape {cov.shape} inconsistent with mean shape {mean.shape}"
            )
        asym = np.max(np.abs(cov - cov.transpose(0, 2, 1)))
        if asym > 1e-12:
            raise ValueError(f"covariance blocks not symmetric (residue {asym:.2e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_sites(self) -> int:
        return self.mean.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.shape[1]


def named_state_vector(name: str) -> np.ndarray:
    """Return the amplitudes of a named pure state in the S_z basis.

    Basis order is (|+1>, |0>, |-1>).  Known names:

    * ``sx_plus_one``  the fully polarized S_x eigenstate, (1/2, 1/sqrt2, 1/2)
    * ``sz_zero``      the middle S_z eigenstate, (0, 1, 0)
    """
    states = {
        "sx_plus_one": np.array([0.5, 1.0 / np.sqrt(2.0), 0.5], dtype=complex),
        "sz_zero": np.array([0.0, 1.0, 0.0], dtype=complex),
    }
    if name not in states:
        raise ValueError(
            f"unknown state '{name}'; known states: {', '.join(sorted(states))}"
        )
    return states[name]


def named_density(name: str) -> np.ndarray:
    """Density matrix of a named state; also accepts ``maximally_mixed``."""
    if name == "maximally_mixed":
        return np.eye(LOCAL_DIM, dtype=complex) / LOCAL_DIM
    psi = named_state_vector(name)
    return np.outer(psi, psi.conj())


def moments_from_density(
    rho: np.ndarray, gens: GeneratorSet | None = None
) -> GaussianMoments:
    """Match a single-site density matrix to Gaussian moments in R^8.

    Parameters
    ----------
    rho
        3x3 density matrix; must be Hermitian, unit trace and positive
        semidefinite within 1e-12.

    Returns
    -------
    GaussianMoments
        with n_sites = 1 and dim = 8.
    """
    if gens is None:
        gens = default_generators()
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (LOCAL_DIM, LOCAL_DIM):
        raise ValueError(f"expected a 3x3 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise ValueError(f"density matrix trace is {np.trace(rho).real!r}, not 1")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < -1e-12:
        raise ValueError(f"density matrix has negative eigenvalue {eigs.min():.2e}")

    t = gens.matrices
    mean = np.einsum("aij,ji->a", t, rho).real
    # symmetrized second moments tr(rho {T_a, T_b}) / 2
    tt = np.einsum("aij,bjk->abik", t, t)
    sym = (tt + tt.transpose(1, 0, 2, 3)) / 2.0
    second = np.einsum("abij,ji->ab", sym, rho).real
    cov = second - np.outer(mean, mean)
    cov = (cov + cov.T) / 2.0
    return GaussianMoments(mean=mean[None], cov=cov[None])


def restrict_su2(moments: GaussianMoments) -> GaussianMoments:
    """Project 8-component moments onto the spin block (components 1..3)."""
    if moments.dim != SU3_DIM:
        raise ValueError("restriction expects 8-component moments")
    return GaussianMoments(
        mean=moments.mean[:, :SU2_DIM], cov=moments.cov[:, :SU2_DIM, :SU2_DIM]
    )


def replicate(moments: GaussianMoments, n_sites: int) -> GaussianMoments:
    """Tile single-site moments across a product lattice of n_sites copies."""
    if moments.n_sites != 1:
        raise ValueError("replicate expects single-site moments")
    if n_sites < 1:
        raise ValueError(f"n_sites must be positive, got {n_sites}")
    return GaussianMoments(
        mean=np.repeat(moments.mean, n_sites, axis=0),
        cov=np.repeat(moments.cov, n_sites, axis=0),
    )


class GaussianSampler:
    """Draws phase-space points from per-site Gaussian moments.

    The covariance of a matched pure state is singular, so each site block is
    eigendecomposed once at construction; eigenvalues in [-1e-10, 0) are
    clamped to zero, anything more negative raises.  Draws are then
    mean + L z with L = V sqrt(lambda) and z standard normal, which keeps the
    exact mean and covariance including the deterministic directions.
    """

    def __init__(self, moments: GaussianMoments):
        self.moments = moments
        lam, vec = np.linalg.eigh(moments.cov)
        if lam.min() < NEGATIVE_EIG_TOL:
            raise ValueError(
                f"covariance is not positive semidefinite: eigenvalue {lam.min():.3e}"
                f" below tolerance {NEGATIVE_EIG_TOL:.0e}"
            )
        lam = np.clip(lam, 0.0, None)
        # (n_sites, dim, dim) transform, columns scaled by sqrt eigenvalues
        self.transform = vec * np.sqrt(lam)[:, None, :]

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Return samples of shape (n_sites, dim), or (size, n_sites, dim)."""
        n, dim = self.moments.mean.shape
        shape = (n, dim) if size is None else (size, n, dim)
        z = rng.standard_normal(shape)
        out = self.moments.mean + np.einsum("nij,...nj->...ni", self.transform, z)
        return out


def sample_gaussian(
    moments: GaussianMoments, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n_samples points, shape (n_samples, n_sites, dim)."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    pts = GaussianSampler(moments).draw(rng, size=n_samples)
    if not np.all(np.isfinite(pts)):
        raise ValueError("sampler produced non-finite values")
    return pts
