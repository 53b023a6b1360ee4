import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wishart_libor import (
    SurfaceGrid,
    WishartParams,
    atm_swaption_surface,
    atm_term_structure,
    black76,
    black_implied_vol,
    build_caplet_surface,
    correlated_q,
    fit_term_structure,
    skew_correlation,
)
from wishart_libor.analytics import skew_from_matrices
from wishart_libor.errors import InvalidParameters, OutOfBand, ZeroVol


# ---------------------------------------------------------------- Black-76


@given(forward=st.floats(0.005, 0.2), moneyness=st.floats(0.5, 2.0), expiry=st.floats(0.1, 10.0),
       discount=st.floats(0.3, 1.0), call=st.booleans())
@settings(max_examples=200, deadline=None)
def test_implied_vol_round_trip(forward, moneyness, expiry, discount, call):
    strike = forward * moneyness
    price = black76(forward, strike, expiry, 0.2, discount, call)
    intrinsic = discount * max(forward - strike if call else strike - forward, 0.0)
    # below this time value the price carries too few digits to pin the vol to 1e-10
    if price - intrinsic < 1e-9 * discount * forward:
        return
    assert black_implied_vol(price, forward, strike, expiry, discount, call) == pytest.approx(0.2, abs=1e-10)


def test_intrinsic_price_returns_zero_vol():
    assert black_implied_vol(0.9 * (0.05 - 0.04), 0.05, 0.04, 1.0, 0.9) == 0.0
    assert black_implied_vol(0.0, 0.05, 0.06, 1.0, 0.9) == 0.0


def test_price_at_upper_bound_is_rejected():
    with pytest.raises(OutOfBand):
        black_implied_vol(0.9 * 0.05, 0.05, 0.04, 1.0, 0.9)
    with pytest.raises(OutOfBand):
        black_implied_vol(0.9 * 0.005, 0.05, 0.04, 1.0, 0.9)


# ---------------------------------------------------------------- skew


def test_scalar_skew_is_one():
    for b, q, s in [(0.3, 0.04, 2.0), (1.5, 0.7, 0.1), (5.0, 0.01, 30.0)]:
        assert skew_from_matrices([[b]], [[q]], [[s]]) == pytest.approx(1.0, abs=1e-15)


def test_skew_for_diagonal_loading_and_rotated_vol():
    b = np.array([0.4, 1.3])
    angle = 0.7
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    expected = np.sum(b ** 3) / math.sqrt(np.sum(b ** 2) * np.sum(b ** 4))
    assert skew_from_matrices(np.diag(b), 0.3 * rot, np.eye(2)) == pytest.approx(expected, rel=1e-14)
    assert skew_from_matrices(0.8 * np.eye(2), 0.3 * rot, np.eye(2)) == pytest.approx(1.0, rel=1e-14)


def test_random_skews_lie_in_unit_interval():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        a = rng.standard_normal((2, 2))
        c = rng.standard_normal((2, 2))
        sigma = a @ a.T + 0.05 * np.eye(2)
        b = c @ c.T + 0.05 * np.eye(2)
        q = rng.standard_normal((2, 2)) + 2.0 * np.eye(2)
        value = skew_from_matrices(b, q, sigma)
        assert 0.0 < value <= 1.0 + 1e-12


def test_zero_loading_has_no_skew():
    with pytest.raises(ZeroVol):
        skew_from_matrices(np.zeros((2, 2)), np.eye(2), np.eye(2))


def test_benchmark_skew(model, family):
    for k in (1, 6, 11):
        assert 0.0 < skew_correlation(model, family, k, model.sigma0) <= 1.0
    with pytest.raises(ValueError):
        skew_correlation(model, family, 3, -np.eye(2))


def test_correlated_q():
    q = correlated_q(0.04, 0.09, 0.5)
    np.testing.assert_allclose(q, [[0.04, 0.03], [0.03, 0.09]])
    for rho in (1.0, -1.0, 1.2):
        with pytest.raises(InvalidParameters):
            correlated_q(0.04, 0.09, rho)


# ---------------------------------------------------------------- surfaces


@pytest.fixture(scope="module")
def surface(model, family, curve):
    strikes = curve.forward_libor(4) * np.linspace(0.8, 1.2, 5)
    return build_caplet_surface(model, family, strikes, [1, 4, 8])


def test_caplet_prices_fall_with_strike(surface):
    assert np.all(np.diff(surface.prices, axis=1) < 0)
    assert np.all(np.isfinite(surface.implied_vols))


def test_surface_vols_reprice(surface, curve):
    for r, k in enumerate(surface.maturities):
        for c, strike in enumerate(surface.strikes):
            price = curve.delta_t * black76(curve.forward_libor(k), strike, curve.maturity(k),
                                            surface.implied_vols[r, c], curve.bond(k + 1))
            assert price == pytest.approx(surface.prices[r, c], rel=1e-10)


def test_atm_column_matches_term_structure(surface, model, family, curve):
    term = atm_term_structure(model, family, surface.maturities)
    assert [t for t, _ in term] == [curve.maturity(k) for k in surface.maturities]
    np.testing.assert_allclose(surface.column(curve.forward_libor(4)), [v for _, v in term], rtol=1e-12)


def test_doubling_q_steepens_atm_term_structure(model, curve):
    steep = WishartParams(model.sigma0, model.m, 2.0 * model.q, model.kappa)
    slopes = []
    for params in (model, steep):
        term = atm_term_structure(params, fit_term_structure(params, curve), [1, 11])
        slopes.append((term[1][1] - term[0][1]) / (term[1][0] - term[0][0]))
    assert slopes[1] > slopes[0]


def test_single_period_swaption_vols_match_caplet_vols(model, family):
    ks = [2, 5, 8]
    grid = atm_swaption_surface(model, family, ks, [1, 2])
    caplet = [v for _, v in atm_term_structure(model, family, ks)]
    np.testing.assert_allclose(grid.implied_vols[:, 0], caplet, atol=5e-3)
    assert np.all(np.isfinite(grid.implied_vols))


def test_swaption_cells_past_last_tenor_are_empty(model, family):
    grid = atm_swaption_surface(model, family, [10], [1, 3])
    assert np.isfinite(grid.prices[0, 0])
    assert np.isnan(grid.prices[0, 1]) and np.isnan(grid.implied_vols[0, 1])


def test_json_round_trip(surface):
    grid = SurfaceGrid(surface.strikes, surface.maturities, surface.prices, surface.implied_vols.copy(),
                       surface.metadata)
    grid.implied_vols[0, 0] = np.nan
    back = SurfaceGrid.from_dict(json.loads(grid.to_json()))
    np.testing.assert_array_equal(back.strikes, grid.strikes)
    np.testing.assert_array_equal(back.maturities, grid.maturities)
    np.testing.assert_array_equal(back.prices, grid.prices)
    np.testing.assert_array_equal(back.implied_vols, grid.implied_vols)
    assert back.metadata == grid.metadata
    assert back.to_json() == grid.to_json()


def test_csv_layout(surface):
    text = surface.to_csv("prices")
    assert text.startswith("# schema_version=1 table=prices kind=caplet\n")
    rows = list(csv.reader(io.StringIO(text.split("\n", 1)[1])))
    assert rows[0][0] == "maturity"
    np.testing.assert_array_equal([float(x) for x in rows[0][1:]], surface.strikes)
    assert [int(r[0]) for r in rows[1:]] == list(surface.maturities)
    np.testing.assert_array_equal([[float(x) for x in r[1:]] for r in rows[1:]], surface.prices)


def test_grid_shape_is_checked():
    with pytest.raises(ValueError):
        SurfaceGrid([0.01, 0.02], [1], np.zeros((1, 3)), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        SurfaceGrid([0.02, 0.01], [1], np.zeros((1, 2)), np.zeros((1, 2)))
