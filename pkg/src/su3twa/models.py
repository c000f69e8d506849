"""Hamiltonians and lattices for spin-one models.

A model is a set of identical-form local terms plus a weighted bond graph,

    H = sum_n [ -B_n . S_n + (U_n / 2) S_z,n^2 - mu_n S_z,n ]
        - sum_bonds w_b (S_x,i S_x,j + S_y,i S_y,j)

with the bond sum over unordered pairs.  The fully connected model written as
-J sum_{n != m} (ordered pairs) therefore maps to bond weight w = 2 J, and a
periodic cubic lattice with coupling Jbar per nearest-neighbor pair has
w = Jbar (doubled to 2 Jbar for linear size 2, where both rings around the
torus connect the same pair).

The same ``ModelSpec`` serves three consumers: the Weyl symbol of H evaluated
on phase-space points (:func:`weyl_energy`), the mean-field vector h_n felt by
each site (:func:`effective_field`, the gradient of the Weyl symbol), and the
exact-diagonalization oracle in :mod:`su3twa.exact`.

Phase-space conventions: in the SU(3) representation a site is X in R^8 with
(X_1, X_2, X_3) the spin components and S_z^2 carried by X_8 through
(S_z^2)_W = (2 - sqrt(3) X_8) / 3; the SU(2) baseline keeps only X in R^3 and
represents S_z^2 by its square with the Weyl correction (S_z^2)_W = X_3^2 - 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import SQRT3

REPRESENTATIONS = ("su2", "su3")

#: phase-space dimension per representation
REP_DIM = {"su2": 3, "su3": 8}


@dataclass(frozen=True)
class SiteTerm:
    """Local Hamiltonian parameters -B.S + (u/2) S_z^2 - mu S_z of one site."""

    b_field: tuple[float, float, float] = (0.0, 0.0, 0.0)
    u: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        b = tuple(float(c) for c in self.b_field)
        if len(b) != 3:
            raise ValueError(f"b_field must have 3 components, got {len(b)}")
        if not all(np.isfinite(b)) or not np.isfinite([self.u, self.mu]).all():
            raise ValueError("site term parameters must be finite")
        object.__setattr__(self, "b_field", b)
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "mu", float(self.mu))


@dataclass(frozen=True)
class CouplingGraph:
    """Weighted undirected bond list over ``n_sites`` sites.

    Bonds are stored canonically: each unordered pair at most once, as
    (i, j) with i < j, no self-bonds.  ``weights[b]`` multiplies the term
    -(S_x,i S_x,j + S_y,i S_y,j) of bond b.
    """

    n_sites: int
    bonds: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be positive, got {self.n_sites}")
        bonds = np.asarray(self.bonds, dtype=int).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(bonds) != len(weights):
            raise ValueError(
                f"{len(bonds)} bonds but {len(weights)} weights"
            )
        if len(bonds):
            if bonds.min() < 0 or bonds.max() >= self.n_sites:
                raise ValueError("bond site index out of range")
            if np.any(bonds[:, 0] >= bonds[:, 1]):
                raise ValueError("bonds must be canonical (i < j), no self-bonds")
            keys = bonds[:, 0] * self.n_sites + bonds[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate bonds; merge weights instead")
        if not np.all(np.isfinite(weights)):
            raise ValueError("bond weights must be finite")
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "weights", weights)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)


def single_site_graph() -> CouplingGraph:
    return CouplingGraph(n_sites=1)


def fully_connected_graph(n_sites: int, j_pair: float) -> CouplingGraph:
    """All-to-all graph for H = -j_pair sum over ordered pairs n != m.

    Each unordered bond carries weight 2 * j_pair because the ordered sum
    visits it twice.  A single site yields an empty bond list.
    """
    if n_sites < 1:
        raise ValueError(f"n_sites must be positive, got {n_sites}")
    idx = np.arange(n_sites)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    mask = ii < jj
    bonds = np.stack([ii[mask], jj[mask]], axis=1)
    weights = np.full(len(bonds), 2.0 * j_pair)
    return CouplingGraph(n_sites=n_sites, bonds=bonds, weights=weights)


def cubic_lattice_graph(l: int, j_bond: float) -> CouplingGraph:
    """Periodic simple-cubic lattice of linear size l, l**3 sites.

    Each nearest-neighbor pair gets weight j_bond.  For l = 2 the +1 and -1
    neighbors along an axis coincide, so the duplicated bond is merged with
    summed weight 2 * j_bond; for l = 1 all neighbors are self-bonds and the
    graph is empty.
    """
    if l < 1:
        raise ValueError(f"linear size must be positive, got {l}")
    n = l**3
    sites = np.arange(n)
    x = sites % l
    y = (sites // l) % l
    z = sites // (l * l)
    merged: dict[tuple[int, int], float] = {}
    for dim, coord in enumerate((x, y, z)):
        shifted = (coord + 1) % l
        if dim == 0:
            nbr = shifted + l * (y + l * z)
        elif dim == 1:
            nbr = x + l * (shifted + l * z)
        else:
            nbr = x + l * (y + l * shifted)
        for s, t in zip(sites, nbr):
            if s == t:
                continue
            key = (min(s, t), max(s, t))
            merged[key] = merged.get(key, 0.0) + j_bond
    if not merged:
        return CouplingGraph(n_sites=n)
    pairs = sorted(merged)
    bonds = np.array(pairs, dtype=int)
    weights = np.array([merged[p] for p in pairs])
    return CouplingGraph(n_sites=n, bonds=bonds, weights=weights)


@dataclass(frozen=True)
class ModelSpec:
    """Representation, per-site terms and bond graph of one model.

    Instances are immutable and safe to share between worker processes.  The
    per-site parameters are unpacked into dense arrays at construction and a
    sparse symmetric coupling matrix is prebuilt for neighbor sums.
    """

    representation: str
    site_terms: tuple[SiteTerm, ...]
    graph: CouplingGraph

    # derived, filled in __post_init__
    b: np.ndarray = field(init=False, repr=False)
    u: np.ndarray = field(init=False, repr=False)
    mu: np.ndarray = field(init=False, repr=False)
    coupling: sp.csr_matrix | None = field(init=False, repr=False)

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(
                f"unknown representation '{self.representation}';"
                f" expected one of {REPRESENTATIONS}"
            )
        terms = tuple(self.site_terms)
        if len(terms) != self.graph.n_sites:
            raise ValueError(
                f"{len(terms)} site terms for {self.graph.n_sites} sites"
            )
        object.__setattr__(self, "site_terms", terms)
        object.__setattr__(self, "b", np.array([t.b_field for t in terms]))
        object.__setattr__(self, "u", np.array([t.u for t in terms]))
        object.__setattr__(self, "mu", np.array([t.mu for t in terms]))
        g = self.graph
        if g.n_bonds:
            i, j = g.bonds[:, 0], g.bonds[:, 1]
            w = sp.coo_matrix(
                (
                    np.concatenate([g.weights, g.weights]),
                    (np.concatenate([i, j]), np.concatenate([j, i])),
                ),
                shape=(g.n_sites, g.n_sites),
            ).tocsr()
        else:
            w = None
        object.__setattr__(self, "coupling", w)

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def dim(self) -> int:
        return REP_DIM[self.representation]


def uniform_model(
    representation: str,
    graph: CouplingGraph,
    b_field: tuple[float, float, float] = (0.0, 0.0, 0.0),
    u: float = 0.0,
    mu: float = 0.0,
) -> ModelSpec:
    """Model with the same local term on every site of ``graph``."""
    term = SiteTerm(b_field=b_field, u=u, mu=mu)
    return ModelSpec(
        representation=representation,
        site_terms=(term,) * graph.n_sites,
        graph=graph,
    )


def _check_points(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim < 2 or x.shape[-2] != model.n_sites or x.shape[-1] != model.dim:
        raise ValueError(
            f"points of shape {x.shape} do not match model with"
            f" {model.n_sites} sites in {model.dim}-dimensional phase space"
        )
    return x


def neighbor_sum(model: ModelSpec, y: np.ndarray) -> np.ndarray:
    """sum_m W_nm y_m for each site n; y has shape (..., n_sites)."""
    if model.coupling is None:
        return np.zeros_like(y)
    flat = y.reshape(-1, model.n_sites)
    # csr @ dense: contract over sites, keep the batch on the right
    out = (model.coupling @ flat.T).T
    return np.ascontiguousarray(out).reshape(y.shape)


def effective_field(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Gradient h = dH_W / dX at phase-space points x, shape like x.

    Only the components that can be nonzero are touched: (1, 2, 3, 8) for
    SU(3) models of the form above, (1, 2, 3) for SU(2).
    """
    x = _check_points(model, x)
    h = np.zeros_like(x)
    h[..., 0] = -model.b[:, 0]
    h[..., 1] = -model.b[:, 1]
    h[..., 2] = -model.b[:, 2] - model.mu
    if model.representation == "su3":
        h[..., 7] = -(SQRT3 / 6.0) * model.u
    else:
        h[..., 2] += model.u * x[..., 2]
    if model.coupling is not None:
        h[..., 0] -= neighbor_sum(model, x[..., 0])
        h[..., 1] -= neighbor_sum(model, x[..., 1])
    return h


def weyl_energy(
    model: ModelSpec, x: np.ndarray, include_constants: bool = True
) -> np.ndarray:
    """Weyl symbol of H at points x; returns the batch shape x.shape[:-2].

    The constant pieces ((U/3) per site for SU(3), -(U/4) for SU(2)) shift
    the energy but not its gradient; ``include_constants=False`` drops them,
    which is handy for checking that the effective field does not see them.
    """
    x = _check_points(model, x)
    spin = x[..., :3]
    e = -(spin * model.b).sum(-1) - model.mu * x[..., 2]
    if model.representation == "su3":
        szsq = -(SQRT3 / 3.0) * x[..., 7]
        if include_constants:
            szsq = szsq + 2.0 / 3.0
        e = e + 0.5 * model.u * szsq
    else:
        szsq = x[..., 2] ** 2
        if include_constants:
            szsq = szsq - 0.5
        e = e + 0.5 * model.u * szsq
    total = e.sum(-1)
    if model.coupling is not None:
        for c in (0, 1):
            yc = x[..., c]
            total = total - 0.5 * (yc * neighbor_sum(model, yc)).sum(-1)
    return total
