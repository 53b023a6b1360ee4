import math
import warnings

import numpy as np
import pytest

from wishart_libor import (
    CapletSpec,
    FloorletSpec,
    FourierConfig,
    MartingaleFamily,
    McConfig,
    caplet_cf,
    forward_swap_rate,
    price_cap,
    price_caplet,
    price_caplets,
    price_floorlet,
)
from wishart_libor.caps import log_cf, price_floorlets
from wishart_libor.errors import ConvergenceWarning
from wishart_libor.libor import log_martingale
from wishart_libor.oracle import mc_expectation

# Caplet prices from tests/oracles/caplet_quadrature.py (Riccati ODE by RK4,
# Gauss-Legendre quadrature of the damped Fourier integral): (k, strikes, prices)
ODE_REFERENCE = [
    (1, [0.04826794919243095, 0.049133974596215386, 0.04999999999999982, 0.050866025403784265, 0.051732050807568694],
     [0.0005601435078942904, 0.0002988835311235899, 0.00010567488160480815, 2.01587170920805e-05, 1.7801182591511437e-06]),  # panel-bisection change 8.9e-15
    (6, [0.04575735931288055, 0.04787867965644019, 0.04999999999999982, 0.05212132034355946, 0.054242640687119086],
     [0.0012629155323389482, 0.0006732213929985325, 0.00023850605785441915, 4.648692926419339e-05, 4.399016026288121e-06]),  # panel-bisection change 1.7e-16
    (8, [0.04510102051443348, 0.047550510257216655, 0.04999999999999982, 0.05244948974278299, 0.054898979485566164],
     [0.0014107822484238617, 0.000751870156072843, 0.0002665364643528307, 5.2251398122187275e-05, 5.033356464611257e-06]),  # panel-bisection change 3.8e-16
]

# 2,000,000-path estimates from tests/oracles/mc_reference.py: (mean, standard error)
MC_REFERENCE = {
    'atm_caplet_2y': (0.00023897831655671242, 2.5129598518135047e-07),
    'cap_3y': (0.001613127509236274, 1.433149995642642e-06),
}


@pytest.mark.parametrize("k, strikes, prices", ODE_REFERENCE)
def test_caplets_match_ode_quadrature_route(model, family, k, strikes, prices):
    got = price_caplets(model, family, k, strikes)
    np.testing.assert_allclose(got, prices, rtol=1e-8, atol=1e-13)


def test_cumulant_function_at_zero_and_one(model, family, curve):
    for k in (1, 6, 11):
        assert abs(log_cf(model, family, k, np.array(0.0))) <= 1e-14
        # the forward bond ratio is a martingale under the forward measure
        ratio = curve.bond(k) / curve.bond(k + 1)
        assert abs(log_cf(model, family, k, np.array(1.0)) - math.log(ratio)) <= 1e-8


def test_equal_directions_give_unit_characteristic_function(model, curve, family):
    xis = family.xis.copy()
    xis[3] = xis[2]
    fam = MartingaleFamily(curve, family.base_direction, xis, family.scale)
    cf = caplet_cf(model, fam, CapletSpec(3, 0.05), np.array([0.0, 1.0, 50.0]), 1.0)
    np.testing.assert_allclose(cf, 1.0, atol=1e-14)


def test_characteristic_function_against_reweighted_monte_carlo(model, family, curve):
    k, alpha = 6, 1.0
    vs = np.array([1.0, 5.0, 10.0])
    t_k = curve.maturity(k)
    log_m0 = log_martingale(model, family, 0.0, k + 1, model.sigma0[None])[0]

    def functional(s):
        lm = log_martingale(model, family, t_k, np.array([k, k + 1]), s[:, 0])
        y = lm[:, 0] - lm[:, 1]
        weight = np.exp(lm[:, 1] - log_m0)
        vals = weight[:, None] * np.exp(((alpha + 1) + 1j * vs[None]) * y[:, None])
        return np.concatenate([vals.real, vals.imag], axis=1)

    est = mc_expectation(model, [t_k], functional, McConfig(n_paths=100_000, dt=1 / 24))
    cf = caplet_cf(model, family, CapletSpec(k, 0.05), vs, alpha)
    for j in range(3):
        assert est[j].within(cf[j].real)
        assert est[3 + j].within(cf[j].imag)


def test_atm_two_year_caplet_against_monte_carlo(model, family, curve):
    mean, se = MC_REFERENCE["atm_caplet_2y"]
    price = price_caplet(model, family, CapletSpec(6, curve.forward_libor(6)))
    assert abs(price - mean) <= 3 * se


def test_deep_in_the_money_limit(model, family, curve):
    for k in (1, 6, 11):
        strike = -(1 - 1e-6) * 3.0
        price = price_caplets(model, family, k, [strike])[0]
        target = curve.bond(k) - 1e-6 * curve.bond(k + 1)
        assert abs(price / target - 1) <= 1e-5


def test_price_decreases_to_zero_in_strike(model, family):
    strikes = np.linspace(0.02, 0.2, 40)
    prices = price_caplets(model, family, 4, strikes)
    assert np.all(np.diff(prices) <= 1e-15)
    assert prices[-1] < 1e-12


def test_parity_with_direct_put_inversion(model, family, curve):
    strikes = np.linspace(0.045, 0.055, 7)
    for k in (2, 9):
        calls = price_caplets(model, family, k, strikes)
        puts = price_floorlets(model, family, k, strikes, method="fourier")
        forward = curve.bond(k) - (1 + strikes / 3) * curve.bond(k + 1)
        assert np.max(np.abs(calls - puts - forward)) <= 1e-10


def test_at_the_money_caplet_equals_floorlet(model, family, curve):
    fwd = curve.forward_libor(5)
    cap = price_caplet(model, family, CapletSpec(5, fwd))
    floor = price_floorlet(model, family, FloorletSpec(5, fwd))
    assert abs(cap - floor) <= 1e-12


def test_floorlet_vanishes_for_lowest_strike(model, family):
    strike = -(1 - 1e-6) * 3.0
    assert price_floorlets(model, family, 3, [strike], method="fourier")[0] <= 1e-14
    # parity subtracts two numbers close to the bond price
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert price_floorlet(model, family, FloorletSpec(3, strike)) <= 1e-10


def test_damping_invariance(model, family):
    strikes = np.linspace(0.046, 0.054, 5)
    for k in (1, 8):
        lo = price_caplets(model, family, k, strikes, FourierConfig(alpha=0.75))
        hi = price_caplets(model, family, k, strikes, FourierConfig(alpha=1.5))
        np.testing.assert_allclose(lo, hi, rtol=1e-7, atol=1e-15)


def test_notional_scales_linearly(model, family):
    base = price_caplet(model, family, CapletSpec(4, 0.05))
    assert price_caplet(model, family, CapletSpec(4, 0.05, notional=1e6)) == pytest.approx(1e6 * base, rel=1e-14)


def test_cap_is_sum_of_caplets(model, family):
    single = price_caplet(model, family, CapletSpec(3, 0.051))
    assert price_cap(model, family, 3, 3, 0.051) == pytest.approx(single, rel=1e-14)
    legs = sum(price_caplet(model, family, CapletSpec(k, 0.051)) for k in range(2, 7))
    assert price_cap(model, family, 2, 6, 0.051) == pytest.approx(legs, rel=1e-14)


def test_three_year_cap_against_monte_carlo(model, family, curve):
    mean, se = MC_REFERENCE["cap_3y"]
    price = price_cap(model, family, 1, 8, forward_swap_rate(curve, 1, 9))
    assert abs(price - mean) <= 3 * se


def test_coarse_explicit_grid_warns(model, family):
    with pytest.warns(ConvergenceWarning):
        price_caplets(model, family, 6, [0.05], FourierConfig(n_nodes=64, v_max=50.0))


def test_invalid_inputs(model, family):
    with pytest.raises(IndexError):
        price_caplets(model, family, 12, [0.05])
    with pytest.raises(ValueError):
        price_caplets(model, family, 3, [-4.0])
    with pytest.raises(ValueError):
        FourierConfig(alpha=-0.5)
