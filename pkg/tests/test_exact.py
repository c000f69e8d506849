"""Dense exact-diagonalization reference dynamics."""

import numpy as np
import numpy.testing as npt
import pytest

from su3twa.exact import (
    build_hamiltonian,
    build_observable,
    evolve_expectation,
    product_state,
)
from su3twa.models import fully_connected_graph, single_site_graph, uniform_model
from su3twa.wigner import named_state_vector

SX_STATE = named_state_vector("sx_plus_one")


def single_spin_model():
    return uniform_model("su3", single_site_graph(), b_field=(0, 0, 1.0), u=1.0)


def test_single_site_spectrum():
    h = build_hamiltonian(single_spin_model())
    npt.assert_allclose(np.linalg.eigvalsh(h), [-0.5, 0.0, 1.5], atol=1e-14)


def test_decoupled_spectrum_is_sum_of_single_site():
    model = uniform_model("su3", fully_connected_graph(2, 0.0), b_field=(0, 0, 1.0), u=1.0)
    single = np.linalg.eigvalsh(build_hamiltonian(single_spin_model()))
    pair = np.linalg.eigvalsh(build_hamiltonian(model))
    npt.assert_allclose(pair, np.sort(np.add.outer(single, single).ravel()), atol=1e-13)


def test_single_spin_sx_curve_is_two_cosines():
    """b_z = u = 1 gives <S_x>(t) = (cos(t/2) + cos(3t/2)) / 2, reviving at 4 pi."""
    times = np.linspace(0.0, 4 * np.pi, 97)
    res = evolve_expectation(
        build_hamiltonian(single_spin_model()),
        product_state(SX_STATE, 1),
        [build_observable("sx_mean", 1)],
        times,
    )
    want = 0.5 * (np.cos(times / 2) + np.cos(3 * times / 2))
    npt.assert_allclose(res.values[0], want, atol=1e-12)
    assert res.values[0, -1] == pytest.approx(1.0, abs=1e-12)  # full revival


def test_product_state_and_initial_expectations():
    psi = product_state(SX_STATE, 3)
    assert psi.shape == (27,)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
    sx = build_observable("sx_mean", 3)
    szsq = build_observable("szsq_per_site", 3)
    assert np.vdot(psi, sx @ psi).real == pytest.approx(1.0, abs=1e-13)
    assert np.vdot(psi, szsq @ psi).real == pytest.approx(0.5, abs=1e-13)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_rho_s_initial_value(m):
    """Product of S_x = 1 states: rho_s(0) = (m - 1) / m."""
    psi = product_state(SX_STATE, m)
    op = build_observable("rho_s", m)
    assert np.vdot(psi, op @ psi).real == pytest.approx((m - 1) / m, abs=1e-12)


def test_observables_are_hermitian():
    for kind in ("sx_mean", "szsq_per_site", "rho_s"):
        op = build_observable(kind, 3)
        npt.assert_allclose(op, op.conj().T, atol=1e-14)


def test_unknown_observable():
    with pytest.raises(ValueError):
        build_observable("sy_mean", 2)


def test_decoupled_sites_factorize():
    """J = 0: per-site curves of the 3-site system equal the 1-site curves."""
    times = np.linspace(0.0, 8.0, 33)
    single = evolve_expectation(
        build_hamiltonian(single_spin_model()),
        product_state(SX_STATE, 1),
        [build_observable("szsq_per_site", 1)],
        times,
    )
    model3 = uniform_model("su3", fully_connected_graph(3, 0.0), b_field=(0, 0, 1.0), u=1.0)
    triple = evolve_expectation(
        build_hamiltonian(model3),
        product_state(SX_STATE, 3),
        [build_observable("szsq_per_site", 3)],
        times,
    )
    npt.assert_allclose(triple.values[0], single.values[0], atol=1e-12)


def test_energy_is_conserved():
    model = uniform_model("su3", fully_connected_graph(3, 0.2), b_field=(0, 0, 1.0), u=1.0)
    h = build_hamiltonian(model)
    res = evolve_expectation(h, product_state(SX_STATE, 3), [h], np.linspace(0, 10, 21))
    npt.assert_allclose(res.values[0], res.values[0, 0], atol=1e-12)


def test_coupled_evolution_changes_curves():
    times = np.linspace(0.0, 5.0, 11)
    curves = []
    for j in (0.0, 0.3):
        model = uniform_model("su3", fully_connected_graph(2, j), b_field=(0, 0, 1.0), u=1.0)
        res = evolve_expectation(
            build_hamiltonian(model),
            product_state(SX_STATE, 2),
            [build_observable("sx_mean", 2)],
            times,
        )
        curves.append(res.values[0])
    assert np.abs(curves[1] - curves[0]).max() > 1e-3


def test_overwrite_h_gives_same_answer():
    model = uniform_model("su3", fully_connected_graph(2, 0.2), b_field=(0, 0, 1.0), u=1.0)
    h = build_hamiltonian(model)
    psi = product_state(SX_STATE, 2)
    obs = [build_observable("sx_mean", 2)]
    times = np.linspace(0.0, 4.0, 9)
    keep = evolve_expectation(h.copy(), psi, obs, times)
    destroy = evolve_expectation(h, psi, obs, times, overwrite_h=True)
    npt.assert_array_equal(keep.values, destroy.values)


def test_validation_errors():
    h = build_hamiltonian(single_spin_model())
    times = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        evolve_expectation(h, np.array([1.0, 1.0, 0.0]), [np.eye(3)], times)  # norm
    bad = np.zeros((3, 3))
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        evolve_expectation(h, product_state(SX_STATE, 1), [bad], times)
    with pytest.raises(ValueError):
        product_state(SX_STATE, 9)  # beyond the dense cap
    with pytest.raises(ValueError):
        build_hamiltonian(
            uniform_model("su3", fully_connected_graph(9, 0.1), u=1.0)
        )
