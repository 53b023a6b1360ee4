import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wishart_libor import matcore
from wishart_libor.errors import Singular


def test_is_spd_examples():
    assert matcore.is_spd(np.eye(2))
    assert not matcore.is_spd(np.diag([1.0, -1.0]))
    assert matcore.is_spd(np.diag([3.75, 3.45]))


def test_expm_trivial_cases():
    assert np.array_equal(matcore.expm(np.zeros((2, 2))), np.eye(2))
    np.testing.assert_allclose(matcore.expm(np.diag([math.log(2), math.log(3)])), np.diag([2.0, 3.0]), rtol=1e-15)


def test_expm_matches_taylor_series():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4))
    a /= np.linalg.norm(a, 2)
    term, total = np.eye(4), np.eye(4)
    for n in range(1, 31):
        term = term @ a / n
        total = total + term
    np.testing.assert_allclose(matcore.expm(a), total, atol=1e-12)


def test_sqrtm_spd():
    np.testing.assert_array_equal(matcore.sqrtm_spd(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(matcore.sqrtm_spd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), rtol=1e-15)
    rng = np.random.default_rng(1)
    b = rng.normal(size=(3, 3))
    a = b @ b.T + 0.1 * np.eye(3)
    s = matcore.sqrtm_spd(a)
    np.testing.assert_allclose(s @ s, a, atol=1e-12)
    np.testing.assert_allclose(s, s.T, atol=0)


def test_lyapunov_closed_forms():
    m = np.diag([-0.0003125, -0.0005])
    q = np.diag([0.034, 0.042])
    c = 3.0 * q.T @ q
    s = matcore.solve_lyapunov(m, c)
    expected = np.diag([3.0 * 0.034 ** 2 / (2 * 0.0003125), 3.0 * 0.042 ** 2 / (2 * 0.0005)])
    np.testing.assert_allclose(s, expected, rtol=1e-14)
    assert np.abs(m @ s + s @ m.T + c).max() <= 1e-12
    np.testing.assert_allclose(matcore.solve_lyapunov(-np.eye(2), 2 * np.eye(2)), np.eye(2), atol=1e-15)


def test_logdet_tracked_examples():
    val, phase = matcore.logdet_tracked(np.eye(2), 0.0)
    assert val == 0 and phase == 0
    val, _ = matcore.logdet_tracked(np.diag([math.e, math.e]), 0.0)
    assert abs(val - 2.0) < 1e-15


def test_logdet_tracked_follows_continuous_branch():
    phase = 0.0
    for t in np.linspace(0.0, 1.0, 101)[1:]:
        val, phase = matcore.logdet_tracked(np.exp(1j * math.pi * t) * np.eye(2), phase)
    assert abs(val.imag - 2 * math.pi) < 1e-12


def test_logdet_tracked_singular():
    with pytest.raises(Singular):
        matcore.logdet_tracked(np.zeros((2, 2)), 0.0)


@given(arrays(np.float64, 6, elements=st.floats(-3, 3)))
@settings(max_examples=50, deadline=None)
def test_vech_round_trip(values):
    a = matcore.ivech(values[:3], 2)
    assert np.array_equal(matcore.vech(a), values[:3])
    assert np.array_equal(a, a.T)


@given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)))
@settings(max_examples=50, deadline=None)
def test_gram_matrices_are_psd(b):
    a = b @ b.T + 1e-3 * np.eye(3)
    assert matcore.is_spd(a)
    s = matcore.sqrtm_spd(a)
    np.testing.assert_allclose(s @ s, a, atol=1e-10)
