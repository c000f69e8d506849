"""Generator basis of su(3) in the spin-one representation.

The eight generators T_1 ... T_8 used throughout this package are normalized
to tr(T_a T_b) = 2 delta_ab and chosen so that the first three coincide with
the spin-one operators S_x, S_y, S_z.  T_8 is the diagonal generator that
carries the quadratic Zeeman / on-site interaction term: S_z^2 decomposes as
(2/3) 1 - (1/sqrt(3)) T_8.  The remaining generators complete the basis of
traceless Hermitian 3x3 matrices.

Structure constants are obtained from traces,

    f_abc = tr([T_a, T_b] T_c) / (2 i)
    d_abc = tr({T_a, T_b} T_c) / 2

where f is totally antisymmetric and d totally symmetric.  These tables close
the algebra, [T_a, T_b] = i sum_c f_abc T_c, and drive the phase-space
equations of motion in :mod:`su3twa.dynamics`.

Nonzero independent entries, for reference and for ``validate-algebra``::

    f_123 = f_147 = f_165 = f_246 = f_257 = f_367 = 1
    f_178 = f_286 = sqrt(3)
    f_345 = 2

    d_114 = d_125 = d_477 = 1
    d_136 = d_224 = d_237 = d_466 = d_567 = -1
    d_118 = d_228 = d_668 = d_778 = 1/sqrt(3)
    d_338 = d_448 = d_558 = -2/sqrt(3)
    d_888 = 2/sqrt(3)

One published listing of this table carries d_888 with the opposite sign;
the trace value above is the one consistent with conservation of the cubic
Casimir (see :func:`compare_with_reference` and the ``validate-algebra``
subcommand, which reports the discrepancy explicitly).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

#: dimension of the local Hilbert space (spin one)
LOCAL_DIM = 3

#: number of generators
N_GEN = 8

# Independent nonzero structure constants, 1-based index triples as commonly
# tabulated.  f extends by antisymmetry, d by symmetry; everything else is 0.
REFERENCE_F: dict[tuple[int, int, int], float] = {
    (1, 2, 3): 1.0,
    (1, 4, 7): 1.0,
    (1, 6, 5): 1.0,
    (2, 4, 6): 1.0,
    (2, 5, 7): 1.0,
    (3, 6, 7): 1.0,
    (1, 7, 8): SQRT3,
    (2, 8, 6): SQRT3,
    (3, 4, 5): 2.0,
}

REFERENCE_D: dict[tuple[int, int, int], float] = {
    (1, 1, 4): 1.0,
    (1, 2, 5): 1.0,
    (4, 7, 7): 1.0,
    (1, 3, 6): -1.0,
    (2, 2, 4): -1.0,
    (2, 3, 7): -1.0,
    (4, 6, 6): -1.0,
    (5, 6, 7): -1.0,
    (1, 1, 8): 1.0 / SQRT3,
    (2, 2, 8): 1.0 / SQRT3,
    (6, 6, 8): 1.0 / SQRT3,
    (7, 7, 8): 1.0 / SQRT3,
    (3, 3, 8): -2.0 / SQRT3,
    (4, 4, 8): -2.0 / SQRT3,
    (5, 5, 8): -2.0 / SQRT3,
    # Sign as printed in a common listing; the trace formula yields +2/sqrt(3)
    # and only that sign conserves the cubic Casimir under the flow.
    (8, 8, 8): -2.0 / SQRT3,
}


@dataclass(frozen=True)
class GeneratorSet:
    """The eight generator matrices, stacked as an (8, 3, 3) complex array."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=complex)
        if m.shape != (N_GEN, LOCAL_DIM, LOCAL_DIM):
            raise ValueError(f"expected shape (8, 3, 3), got {m.shape}")
        object.__setattr__(self, "matrices", m)

    def spin(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (S_x, S_y, S_z); these are T_1, T_2, T_3 by construction."""
        return self.matrices[0], self.matrices[1], self.matrices[2]

    def __getitem__(self, a: int) -> np.ndarray:
        return self.matrices[a]


@dataclass(frozen=True)
class AlgebraTables:
    """Structure constant tensors f (antisymmetric) and d (symmetric)."""

    f: np.ndarray
    d: np.ndarray


@dataclass
class TableDiscrepancy:
    """A single entry where computed and reference tables disagree."""

    index: tuple[int, int, int]  # 1-based
    computed: float
    reference: float


def build_generator_set() -> GeneratorSet:
    """Construct the spin-one generator basis.

    Returns
    -------
    GeneratorSet
        T_1..T_3 are the spin matrices, T_8 = diag(-1, 2, -1)/sqrt(3), all
        normalized to tr(T_a T_b) = 2 delta_ab.
    """
    t = np.zeros((N_GEN, LOCAL_DIM, LOCAL_DIM), dtype=complex)
    i = 1j
    t[0] = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / SQRT2
    t[1] = np.array([[0, -i, 0], [i, 0, -i], [0, i, 0]]) / SQRT2
    t[2] = np.diag([1.0, 0.0, -1.0])
    t[3] = np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]])
    t[4] = np.array([[0, 0, -i], [0, 0, 0], [i, 0, 0]])
    # sign convention of T_6, T_7 follows the tabulated structure constants
    # (they equal minus the anticommutators {S_x, S_z} and {S_y, S_z})
    t[5] = np.array([[0, -1, 0], [-1, 0, 1], [0, 1, 0]]) / SQRT2
    t[6] = np.array([[0, i, 0], [-i, 0, -i], [0, i, 0]]) / SQRT2
    t[7] = np.diag([-1.0, 2.0, -1.0]) / SQRT3
    return GeneratorSet(t)


@lru_cache(maxsize=1)
def default_generators() -> GeneratorSet:
    return build_generator_set()


@lru_cache(maxsize=1)
def default_tables() -> AlgebraTables:
    return structure_constants(default_generators())


def structure_constants(gens: GeneratorSet | None = None) -> AlgebraTables:
    """Compute f and d tensors from traces of the generator matrices.

    f_abc = tr([T_a, T_b] T_c) / (2i) and d_abc = tr({T_a, T_b} T_c) / 2,
    consistent with the tr(T_a T_b) = 2 delta_ab normalization.

    Raises
    ------
    ValueError
        if either tensor comes out with a significant imaginary part, which
        would mean the input matrices are not a Hermitian basis.
    """
    if gens is None:
        gens = default_generators()
    t = gens.matrices
    # tr(T_a T_b T_c) for all triples; f/d are its anti/symmetrized parts.
    tt = np.einsum("aij,bjk,cki->abc", t, t, t)
    f = (tt - tt.transpose(1, 0, 2)) / 2j
    d = (tt + tt.transpose(1, 0, 2)) / 2
    for name, arr in (("f", f), ("d", d)):
        imag = np.max(np.abs(arr.imag))
        if imag > 1e-10:
            raise ValueError(
                f"structure constants {name} have imaginary residue {imag:.2e};"
                " generator basis is not Hermitian"
            )
    return AlgebraTables(f=f.real.copy(), d=d.real.copy())


def expand_reference(
    entries: dict[tuple[int, int, int], float], odd: bool
) -> np.ndarray:
    """Expand a table of independent entries into a dense (8, 8, 8) tensor.

    Parameters
    ----------
    entries
        mapping of 1-based index triples to values.
    odd
        True for a totally antisymmetric tensor (f), False for totally
        symmetric (d).
    """
    out = np.zeros((N_GEN, N_GEN, N_GEN))
    for (a, b, c), val in entries.items():
        base = (a - 1, b - 1, c - 1)
        for perm in set(permutations(range(3))):
            idx = tuple(base[p] for p in perm)
            sign = _parity(perm) if odd else 1.0
            out[idx] = sign * val
    return out


def _parity(perm: tuple[int, ...]) -> float:
    inversions = sum(
        1 for x in range(len(perm)) for y in range(x + 1, len(perm)) if perm[x] > perm[y]
    )
    return -1.0 if inversions % 2 else 1.0


def compare_with_reference(
    tables: AlgebraTables | None = None, atol: float = 1e-12
) -> tuple[list[TableDiscrepancy], list[TableDiscrepancy]]:
    """Diff the trace-computed tensors against the reference listings.

    Returns two lists of discrepancies (for f and d).  Only index triples in
    canonical nondecreasing order are reported, one per symmetry orbit.  With
    the basis built here the f list is empty and the d list contains exactly
    the (8, 8, 8) entry, whose reference sign disagrees with the trace value.
    """
    if tables is None:
        tables = default_tables()
    out = []
    for arr, ref_entries, odd in (
        (tables.f, REFERENCE_F, True),
        (tables.d, REFERENCE_D, False),
    ):
        ref = expand_reference(ref_entries, odd=odd)
        diffs = []
        for a in range(N_GEN):
            for b in range(a, N_GEN):
                for c in range(b, N_GEN):
                    got, want = arr[a, b, c], ref[a, b, c]
                    if abs(got - want) > atol:
                        diffs.append(
                            TableDiscrepancy((a + 1, b + 1, c + 1), got, want)
                        )
        out.append(diffs)
    return out[0], out[1]


def decompose_hermitian(
    h: np.ndarray, gens: GeneratorSet | None = None
) -> tuple[float, np.ndarray]:
    """Expand a Hermitian 3x3 matrix as c_0 * 1 + sum_a c_a T_a.

    Returns (c_0, c) with c of shape (8,).  Since tr(T_a T_b) = 2 delta_ab,
    the coefficients are c_0 = tr(h)/3 and c_a = tr(h T_a)/2.

    Raises
    ------
    ValueError
        if ``h`` is not Hermitian within 1e-12 of its scale.
    """
    if gens is None:
        gens = default_generators()
    h = np.asarray(h, dtype=complex)
    if h.shape != (LOCAL_DIM, LOCAL_DIM):
        raise ValueError(f"expected a 3x3 matrix, got shape {h.shape}")
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    c0 = np.trace(h).real / LOCAL_DIM
    coeffs = np.einsum("aij,ji->a", gens.matrices, h).real / 2.0
    return c0, coeffs


def reconstruct_hermitian(
    c0: float, coeffs: np.ndarray, gens: GeneratorSet | None = None
) -> np.ndarray:
    """Inverse of :func:`decompose_hermitian`."""
    if gens is None:
        gens = default_generators()
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (N_GEN,):
        raise ValueError(f"expected 8 coefficients, got shape {coeffs.shape}")
    return c0 * np.eye(LOCAL_DIM) + np.tensordot(coeffs, gens.matrices, axes=1)
