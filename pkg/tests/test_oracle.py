import csv
import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import expm

from wishart_libor import (
    CapletSpec,
    McConfig,
    SwaptionSpec,
    WishartParams,
    fit_term_structure,
    forward_swap_rate,
    laplace,
    price_caplet,
    price_swaption,
    simulate_jump_ou,
    simulate_wishart,
)
from wishart_libor.errors import ConfigError
from wishart_libor.oracle import dump_paths, mc_laplace, mc_price


def test_config_validation():
    with pytest.raises(ConfigError):
        McConfig(n_paths=10)
    with pytest.raises(ConfigError):
        McConfig(scheme="sobol")
    with pytest.raises(ConfigError):
        McConfig(dt=1 / 12).check_step(1 / 3)


def test_noiseless_wishart_follows_linear_flow():
    m = np.array([[-0.4, 0.1], [0.05, -0.2]])
    params = WishartParams(np.array([[1.0, 0.3], [0.3, 2.0]]), m, 1e-15 * np.eye(2), 3.0)
    paths = simulate_wishart(params, 1.0, McConfig(n_paths=1000, dt=0.1), times=[0.5, 1.0])
    for j, t in enumerate(paths.times):
        e = expm(m * t)
        np.testing.assert_allclose(paths.states[:, j], np.broadcast_to(e @ params.sigma0 @ e.T, (1000, 2, 2)),
                                   rtol=1e-12, atol=1e-12)


def test_wishart_mean_matches_moment_ode():
    m = np.array([[-0.5, 0.1], [0.0, -0.3]])
    q = np.array([[0.3, 0.1], [0.0, 0.2]])
    params = WishartParams(np.array([[1.0, 0.2], [0.2, 0.8]]), m, q, 3.0)
    t = 1.0
    e = expm(m * t)
    drift, _ = quad_vec(lambda s: expm(m * s) @ (3.0 * q.T @ q) @ expm(m.T * s), 0.0, t, epsabs=1e-13)
    exact = e @ params.sigma0 @ e.T + drift
    states = simulate_wishart(params, t, McConfig(n_paths=40_000, dt=0.25), times=[t]).states[:, 0]
    mean = states.mean(axis=0)
    se = states.std(axis=0, ddof=1) / np.sqrt(states.shape[0])
    assert np.all(np.abs(mean - exact) <= 3 * se)


def test_exact_scheme_paths_stay_positive_definite(model):
    states = simulate_wishart(model, 4.0, McConfig(n_paths=2000, dt=1 / 24)).states
    assert np.linalg.eigvalsh(states).min() > 0


def test_euler_scheme_is_flagged_biased(model):
    paths = simulate_wishart(model, 1.0, McConfig(n_paths=1000, dt=1 / 24, scheme="euler_projected"), times=[1.0])
    assert paths.biased
    assert np.linalg.eigvalsh(paths.states).min() >= -1e-12


def test_wishart_laplace_against_affine_transform(model):
    u = 0.1 * np.eye(2)
    est = mc_laplace(model, 1.0, [u], McConfig(n_paths=50_000, dt=1 / 24))[0]
    assert est.within(laplace(model, 1.0, u))


def test_jump_model_without_jumps_is_deterministic(jump_model):
    params = dataclasses.replace(jump_model, lam=0.0)
    paths = simulate_jump_ou(params, 2.0, McConfig(n_paths=1000), times=[1.0, 2.0])
    for j, t in enumerate(paths.times):
        e = expm(params.m * t)
        np.testing.assert_allclose(paths.states[:, j], np.broadcast_to(e @ params.sigma0 @ e.T, (1000, 2, 2)),
                                   rtol=1e-12)
    assert not paths.jump_counts.any()


def test_jump_count_mean_matches_intensity(jump_model):
    horizon = 5.0
    counts = simulate_jump_ou(jump_model, horizon, McConfig(n_paths=40_000), times=[horizon]).jump_counts
    se = np.sqrt(jump_model.lam * horizon / counts.size)
    assert abs(counts.mean() - jump_model.lam * horizon) <= 3 * se


def test_jump_laplace_against_affine_transform(jump_model):
    u = 0.05 * np.eye(2)
    est = mc_laplace(jump_model, 1.0, [u], McConfig(n_paths=100_000))[0]
    assert est.within(laplace(jump_model, 1.0, u))


def test_noiseless_caplet_pays_deterministic_intrinsic(curve):
    params = WishartParams(np.diag([3.75, 3.45]), np.diag([-0.3, -0.5]), 1e-9 * np.eye(2), 3.0)
    fam = fit_term_structure(params, curve)
    k = 4
    strike = 0.8 * curve.forward_libor(k)
    est = mc_price(CapletSpec(k, strike), params, fam, McConfig(n_paths=1000, dt=1 / 24))
    intrinsic = curve.delta_t * curve.bond(k + 1) * (curve.forward_libor(k) - strike)
    assert est.std_error < 1e-12
    assert est.mean == pytest.approx(intrinsic, rel=1e-8)


def test_caplet_against_fourier_price(model, family, curve):
    spec = CapletSpec(3, curve.forward_libor(3))
    est = mc_price(spec, model, family, McConfig(n_paths=100_000, dt=1 / 24))
    assert est.within(price_caplet(model, family, spec))


def test_swaption_against_expansion_price(model, family, curve):
    spec = SwaptionSpec(3, 6, forward_swap_rate(curve, 3, 6))
    est = mc_price(spec, model, family, McConfig(n_paths=100_000, dt=1 / 24))
    assert est.within(price_swaption(model, family, spec))


def test_antithetic_does_not_increase_variance(model, family, curve):
    spec = CapletSpec(3, curve.forward_libor(3))
    plain = mc_price(spec, model, family, McConfig(n_paths=40_000, dt=1 / 24))
    anti = mc_price(spec, model, family, McConfig(n_paths=40_000, dt=1 / 24, antithetic=True))
    assert anti.std_error <= plain.std_error


def test_estimates_are_identical_across_worker_counts(model, family, curve):
    spec = CapletSpec(2, curve.forward_libor(2))
    runs = [mc_price(spec, model, family, McConfig(n_paths=20_000, dt=1 / 24, chunk_size=5000, workers=w))
            for w in (1, 3, 1)]
    assert runs[0] == runs[1] == runs[2]


def test_different_seeds_give_different_estimates(model, family, curve):
    spec = CapletSpec(2, curve.forward_libor(2))
    a = mc_price(spec, model, family, McConfig(n_paths=5000, dt=1 / 24, seed=1))
    b = mc_price(spec, model, family, McConfig(n_paths=5000, dt=1 / 24, seed=2))
    assert a.mean != b.mean


def test_path_dump_layout(model, tmp_path):
    paths = simulate_wishart(model, 1.0, McConfig(n_paths=1000, dt=0.25, seed=7), times=[0.5, 1.0])
    paths.states = paths.states[:3]
    out = tmp_path / "paths.csv"
    dump_paths(paths, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema_version=1 seed=7 scheme=exact_squared_ou biased=false"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["path_id", "t", "s11", "s12", "s22"]
    assert len(rows) == 1 + 3 * 2
    assert [int(r[0]) for r in rows[1:]] == [0, 0, 1, 1, 2, 2]
    s = paths.states[1, 1]
    assert [float(x) for x in rows[4][1:]] == [1.0, s[0, 0], s[0, 1], s[1, 1]]
