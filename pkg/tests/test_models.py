"""Model assembly: coupling graphs, effective field, Weyl energy."""

import numpy as np
import numpy.testing as npt
import pytest

from su3twa.models import (
    CouplingGraph,
    ModelSpec,
    SiteTerm,
    cubic_lattice_graph,
    effective_field,
    fully_connected_graph,
    neighbor_sum,
    single_site_graph,
    uniform_model,
    weyl_energy,
)

SQRT3 = np.sqrt(3.0)


def numerical_gradient(model, x, eps=1e-6):
    """Central-difference gradient of the Weyl energy, one site at a time."""
    g = np.zeros_like(x)
    for n in range(x.shape[0]):
        for a in range(x.shape[1]):
            xp = x.copy()
            xp[n, a] += eps
            xm = x.copy()
            xm[n, a] -= eps
            g[n, a] = (weyl_energy(model, xp) - weyl_energy(model, xm)) / (2 * eps)
    return g


def test_site_term_validation():
    with pytest.raises(ValueError):
        SiteTerm(b_field=(0.0, 1.0))
    with pytest.raises(ValueError):
        SiteTerm(u=np.inf)


def test_single_site_graph():
    g = single_site_graph()
    assert g.n_sites == 1 and g.n_bonds == 0


def test_coupling_graph_validation():
    with pytest.raises(ValueError):
        CouplingGraph(n_sites=2, bonds=np.array([[0, 0]]), weights=np.array([1.0]))
    with pytest.raises(ValueError):
        CouplingGraph(n_sites=2, bonds=np.array([[0, 2]]), weights=np.array([1.0]))
    with pytest.raises(ValueError):
        CouplingGraph(
            n_sites=3,
            bonds=np.array([[0, 1], [0, 1]]),
            weights=np.array([1.0, 1.0]),
        )
    with pytest.raises(ValueError):
        CouplingGraph(n_sites=3, bonds=np.array([[0, 1]]), weights=np.array([1.0, 2.0]))


def test_fully_connected_graph():
    g = fully_connected_graph(4, 0.25)
    assert g.n_bonds == 6
    npt.assert_allclose(g.weights, 0.5)  # ordered-pair sum doubles each bond
    assert fully_connected_graph(1, 0.25).n_bonds == 0


@pytest.mark.parametrize("l,n", [(3, 27), (4, 64)])
def test_cubic_lattice_counts(l, n):
    g = cubic_lattice_graph(l, 0.1)
    assert g.n_sites == n
    assert g.n_bonds == 3 * n  # periodic cube: 3 distinct bonds per site
    npt.assert_allclose(g.weights, 0.1)
    degree = np.zeros(n)
    for i, j in g.bonds:
        degree[i] += 1
        degree[j] += 1
    npt.assert_allclose(degree, 6.0)


def test_cubic_lattice_small_sizes():
    # l = 2: +x and -x wrap to the same neighbor, so the two bonds merge
    g = cubic_lattice_graph(2, 0.1)
    assert g.n_sites == 8 and g.n_bonds == 12
    npt.assert_allclose(g.weights, 0.2)
    # l = 1: every neighbor is the site itself, which is no bond at all
    g1 = cubic_lattice_graph(1, 0.1)
    assert g1.n_sites == 1 and g1.n_bonds == 0


def test_neighbor_sum_matches_dense_matrix():
    g = cubic_lattice_graph(3, 0.7)
    model = uniform_model("su3", g)
    w = np.zeros((27, 27))
    for (i, j), wt in zip(g.bonds, g.weights):
        w[i, j] = w[j, i] = wt
    rng = np.random.default_rng(5)
    y = rng.normal(size=(4, 27))
    npt.assert_allclose(neighbor_sum(model, y), y @ w.T, atol=1e-12)


def test_model_spec_validation():
    g = fully_connected_graph(3, 0.1)
    with pytest.raises(ValueError):
        ModelSpec(representation="su4", site_terms=(SiteTerm(),) * 3, graph=g)
    with pytest.raises(ValueError):
        ModelSpec(representation="su3", site_terms=(SiteTerm(),) * 2, graph=g)


def test_effective_field_single_site_su3():
    model = uniform_model("su3", single_site_graph(), b_field=(0, 0, 1.0), u=1.0)
    h = effective_field(model, np.zeros((1, 8)))
    want = np.zeros((1, 8))
    want[0, 2] = -1.0
    want[0, 7] = -SQRT3 / 6.0
    npt.assert_allclose(h, want, atol=1e-15)


def test_effective_field_su2_quadratic_term():
    model = uniform_model("su2", single_site_graph(), u=2.0)
    x = np.zeros((1, 3))
    x[0, 2] = 0.3
    h = effective_field(model, x)
    npt.assert_allclose(h[0], [0.0, 0.0, 0.6], atol=1e-15)


def test_effective_field_coupling():
    model = uniform_model("su3", fully_connected_graph(2, 0.25))
    x = np.zeros((2, 8))
    x[1, 0] = 1.0  # X_1 on site 2 feeds site 1 through the bond (weight 0.5)
    h = effective_field(model, x)
    assert h[0, 0] == pytest.approx(-0.5, abs=1e-15)
    assert h[1, 0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("representation", ["su2", "su3"])
@pytest.mark.parametrize("coupled", [False, True])
def test_effective_field_is_energy_gradient(representation, coupled):
    dim = {"su2": 3, "su3": 8}[representation]
    graph = fully_connected_graph(3, 0.2) if coupled else CouplingGraph(n_sites=3)
    model = uniform_model(representation, graph, b_field=(0.3, -0.2, 0.5), u=1.3, mu=0.4)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(3, dim))
    npt.assert_allclose(effective_field(model, x), numerical_gradient(model, x), atol=5e-8)


def test_energy_constants_do_not_enter_gradient():
    model = uniform_model("su2", single_site_graph(), u=1.0)
    x = np.array([[0.4, -0.1, 0.9]])
    full = weyl_energy(model, x)
    bare = weyl_energy(model, x, include_constants=False)
    assert full - bare == pytest.approx(-0.25, abs=1e-15)  # -u/4 per site


def test_weyl_energy_matches_quantum_expectation():
    """At the initial mean of |S_x = 1>, the symbol reproduces <H> = 1/4."""
    model = uniform_model("su3", single_site_graph(), b_field=(0, 0, 1.0), u=1.0)
    mean = np.zeros((1, 8))
    mean[0, 0] = 1.0
    mean[0, 3] = 0.5
    mean[0, 7] = 1.0 / (2.0 * SQRT3)
    assert weyl_energy(model, mean) == pytest.approx(0.25, abs=1e-14)


def test_weyl_energy_batch_shape():
    model = uniform_model("su3", fully_connected_graph(2, 0.1), u=1.0)
    x = np.random.default_rng(0).normal(size=(5, 4, 2, 8))
    assert weyl_energy(model, x).shape == (5, 4)


def test_rejects_wrong_state_shape():
    model = uniform_model("su3", single_site_graph())
    with pytest.raises(ValueError):
        effective_field(model, np.zeros((1, 3)))
    with pytest.raises(ValueError):
        effective_field(model, np.zeros((2, 8)))
