"""Trajectory sampling, observable estimators, ensemble statistics."""

import numpy as np
import numpy.testing as npt
import pytest

from su3twa.ensemble import (
    EnsembleConfig,
    observable_values,
    run_ensemble,
    run_mean_trajectory,
    trajectory_rng,
)
from su3twa.models import (
    fully_connected_graph,
    single_site_graph,
    uniform_model,
    weyl_energy,
)
from su3twa.wigner import GaussianMoments, moments_from_density, named_density, replicate

SQRT3 = np.sqrt(3.0)


def single_spin_model(representation="su3"):
    return uniform_model(representation, single_site_graph(), b_field=(0, 0, 1.0), u=1.0)


def analytic_sx(times):
    return 0.5 * (np.cos(times / 2) + np.cos(3 * times / 2))


def test_observable_sx_mean():
    x = np.zeros((2, 8))
    x[0, 0], x[1, 0] = 0.2, 0.6
    model = uniform_model("su3", fully_connected_graph(2, 0.0))
    assert observable_values("sx_mean", x, model) == pytest.approx(0.4, abs=1e-15)


def test_observable_szsq_su3_symbol():
    """<S_z^2> enters through X_8: (2 - sqrt(3) X_8) / 3."""
    model = uniform_model("su3", single_site_graph())
    mott = np.zeros((1, 8))
    mott[0, 7] = 2.0 / SQRT3  # the S_z = 0 product state mean
    assert observable_values("szsq_per_site", mott, model) == pytest.approx(0.0, abs=1e-14)
    assert observable_values("szsq_per_site", np.zeros((1, 8)), model) == pytest.approx(
        2.0 / 3.0, abs=1e-15
    )


def test_observable_szsq_su2_is_plain_square():
    # direct substitution: the sampled second moments already carry the
    # symmetrized quantum value of S_z^2
    model = uniform_model("su2", single_site_graph())
    x = np.array([[0.0, 0.0, 0.7]])
    assert observable_values("szsq_per_site", x, model) == pytest.approx(0.49, abs=1e-15)


def test_observable_rho_s():
    """Off-site transverse correlator from the collective components."""
    model = uniform_model("su3", fully_connected_graph(2, 0.0))
    x = np.zeros((2, 8))
    x[:, 0] = 1.0
    assert observable_values("rho_s", x, model) == pytest.approx(0.5, abs=1e-15)
    x[:, 1] = 1.0  # X_2 contributes the same way
    assert observable_values("rho_s", x, model) == pytest.approx(1.0, abs=1e-15)


def test_observable_casimirs_and_energy():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    x = m.mean[None]  # batch of one
    npt.assert_allclose(observable_values("casimir1", x, model), [4.0 / 3.0], atol=1e-13)
    npt.assert_allclose(observable_values("casimir2", x, model), [16.0 / 9.0], atol=1e-13)
    npt.assert_allclose(
        observable_values("energy", x, model), weyl_energy(model, x), atol=1e-14
    )


def test_observable_validation():
    model = single_spin_model("su2")
    with pytest.raises(ValueError):
        observable_values("sz_mean", np.zeros((1, 3)), model)
    with pytest.raises(ValueError):
        observable_values("casimir1", np.zeros((1, 3)), model)


def test_trajectory_rng_streams():
    a = trajectory_rng(7, 0).normal(size=4)
    b = trajectory_rng(7, 0).normal(size=4)
    c = trajectory_rng(7, 1).normal(size=4)
    npt.assert_array_equal(a, b)
    assert np.abs(a - c).max() > 1e-3


def test_mean_trajectory_matches_exact_curve():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.linspace(0.0, 20.0, 81)
    res = run_mean_trajectory(model, m, ("sx_mean",), times, dt=0.01)
    npt.assert_allclose(res.mean[0], analytic_sx(res.times), atol=1e-7)
    npt.assert_array_equal(res.sem, 0.0)


def test_mean_trajectory_refuses_bonds_and_nonlinear_symbols():
    m2 = replicate(moments_from_density(named_density("sx_plus_one")), 2)
    coupled = uniform_model("su3", fully_connected_graph(2, 0.1), u=1.0)
    with pytest.raises(ValueError):
        run_mean_trajectory(coupled, m2, ("sx_mean",), np.array([1.0]))
    with pytest.raises(ValueError):
        run_mean_trajectory(
            single_spin_model(), moments_from_density(named_density("sx_plus_one")),
            ("rho_s",), np.array([1.0]),
        )
    su2 = single_spin_model("su2")
    from su3twa.wigner import restrict_su2

    m_su2 = restrict_su2(moments_from_density(named_density("sx_plus_one")))
    with pytest.raises(ValueError):
        # for su2 the S_z^2 symbol is quadratic, so the mean cannot carry it
        run_mean_trajectory(su2, m_su2, ("szsq_per_site",), np.array([1.0]))


def test_ensemble_tracks_exact_single_spin():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.linspace(0.0, 20.0, 41)
    res = run_ensemble(model, m, ("sx_mean",), times, EnsembleConfig(n_traj=2000))
    want = analytic_sx(res.times)
    dev = np.abs(res.mean[0] - want)
    assert (dev <= 5.0 * np.maximum(res.sem[0], 1e-12)).all()
    assert res.sem[0, 1:].min() > 0.0
    assert res.metadata["n_failed"] == 0
    assert res.metadata["casimir_max_drift"] < 1e-6


def test_ensemble_determinism_across_workers_and_chunks():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.linspace(0.0, 5.0, 11)
    base = run_ensemble(
        model, m, ("sx_mean",), times, EnsembleConfig(n_traj=120, chunk_size=120)
    )
    for cfg in (
        EnsembleConfig(n_traj=120, chunk_size=32),
        EnsembleConfig(n_traj=120, chunk_size=32, workers=2),
        EnsembleConfig(n_traj=120, chunk_size=7, workers=3),
    ):
        again = run_ensemble(model, m, ("sx_mean",), times, cfg)
        npt.assert_array_equal(base.mean, again.mean)
        npt.assert_array_equal(base.sem, again.sem)


def test_ensemble_seed_changes_result():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.linspace(0.0, 5.0, 11)
    a = run_ensemble(model, m, ("sx_mean",), times, EnsembleConfig(n_traj=50, seed=1))
    b = run_ensemble(model, m, ("sx_mean",), times, EnsembleConfig(n_traj=50, seed=2))
    assert np.abs(a.mean - b.mean).max() > 1e-6


def test_sem_scales_with_inverse_root_n():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.array([0.0, 6.0])
    sems = [
        run_ensemble(model, m, ("sx_mean",), times, EnsembleConfig(n_traj=n)).sem[0, 1]
        for n in (250, 1000, 4000)
    ]
    assert 1.5 < sems[0] / sems[1] < 2.7
    assert 1.5 < sems[1] / sems[2] < 2.7


def test_zero_covariance_ensemble_is_deterministic():
    mean = np.zeros((1, 8))
    mean[0, 0] = 1.0
    init = GaussianMoments(mean, np.zeros((1, 8, 8)))
    model = single_spin_model()
    times = np.linspace(0.0, 3.0, 7)
    res = run_ensemble(model, init, ("sx_mean",), times, EnsembleConfig(n_traj=16))
    npt.assert_allclose(res.sem, 0.0, atol=1e-14)
    single = run_mean_trajectory(model, init, ("sx_mean",), times, dt=0.01)
    npt.assert_allclose(res.mean, single.mean, atol=1e-13)


def test_single_trajectory_has_zero_sem():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    res = run_ensemble(model, m, ("sx_mean",), np.array([0.0, 1.0]), EnsembleConfig(n_traj=1))
    npt.assert_array_equal(res.sem, 0.0)


def test_diverging_trajectories_are_excluded_and_counted():
    """A few unstable draws must not poison the surviving average."""
    model = uniform_model("su3", fully_connected_graph(2, 0.5))
    sigma = 12.0
    init = GaussianMoments(np.zeros((2, 8)), np.tile(sigma**2 * np.eye(8), (2, 1, 1)))
    times = np.linspace(0.0, 10.0, 11)
    res = run_ensemble(
        model, init, ("sx_mean",), times, EnsembleConfig(n_traj=2000, dt=0.05)
    )
    assert 0 < res.metadata["n_failed"] <= 20
    assert np.isfinite(res.mean).all() and np.isfinite(res.sem).all()


def test_too_many_divergences_abort():
    model = uniform_model("su3", fully_connected_graph(2, 0.5))
    sigma = 20.0
    init = GaussianMoments(np.zeros((2, 8)), np.tile(sigma**2 * np.eye(8), (2, 1, 1)))
    with pytest.raises(RuntimeError):
        run_ensemble(
            model, init, ("sx_mean",), np.linspace(0.0, 10.0, 11),
            EnsembleConfig(n_traj=500, dt=0.05),
        )


def test_run_ensemble_validation():
    model = single_spin_model()
    m = moments_from_density(named_density("sx_plus_one"))
    times = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        run_ensemble(model, m, (), times, EnsembleConfig(n_traj=4))
    with pytest.raises(ValueError):
        run_ensemble(model, m, ("bogus",), times, EnsembleConfig(n_traj=4))
    with pytest.raises(ValueError):
        run_ensemble(model, replicate(m, 2), ("sx_mean",), times, EnsembleConfig(n_traj=4))
    su2 = single_spin_model("su2")
    with pytest.raises(ValueError):
        run_ensemble(su2, m, ("sx_mean",), times, EnsembleConfig(n_traj=4))


def test_su2_run_has_no_casimir_metadata():
    from su3twa.wigner import restrict_su2

    su2 = single_spin_model("su2")
    m = restrict_su2(moments_from_density(named_density("sx_plus_one")))
    res = run_ensemble(su2, m, ("sx_mean",), np.array([0.0, 1.0]), EnsembleConfig(n_traj=8))
    assert "casimir_max_drift" not in res.metadata
    assert res.metadata["representation"] == "su2"
