"""European swaptions as options on a coupon bond, priced from its exact moments.

A receiver swaption expiring at ``T_i`` on a swap to ``T_m`` pays
``(CB(T_i) - 1)^+`` with ``CB(T_i) = sum_{k=i+1}^m c_k B(T_i,T_k)``. Its price is

    sum_k c_k B(0,T_k) P_{T_k}[CB > 1] - B(0,T_i) P_{T_i}[CB > 1].

Each probability comes from an Edgeworth tail expansion built on the
cumulants of ``CB(T_i)`` under the relevant forward measure; the cumulants come
from raw moments that are available in closed form, because every power of the
coupon bond is a sum of exponential-affine functions of ``S_{T_i}``.

The central moments of ``CB`` are many orders of magnitude below its raw moments,
so moments and cumulants are evaluated in ``mpmath`` at ``dps`` decimal digits.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import ndtr

from .affine import Model, MpTransform, _to_mp
from .errors import ClippingWarning, DegenerateDistribution, TransformBlowUp
from .libor import MartingaleFamily

DEFAULT_DPS = 50
MAX_ORDER = 7


@dataclass(frozen=True)
class SwaptionSpec:
    """Swaption expiring at ``T_i`` on the swap paying fixed ``strike`` over ``(T_i, T_m]``."""

    i: int
    m: int
    strike: float
    side: str = "receiver"
    notional: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.i, (int, np.integer)) and isinstance(self.m, (int, np.integer))):
            raise ValueError("tenor indices must be integers")
        if not 1 <= self.i < self.m:
            raise ValueError(f"need 1 <= i < m, got i={self.i}, m={self.m}")
        if self.side not in ("receiver", "payer"):
            raise ValueError(f"side must be 'receiver' or 'payer', got {self.side!r}")
        if not self.notional > 0:
            raise ValueError("notional must be positive")

    def coupons(self, delta_t: float) -> dict[int, float]:
        """``c_k = dT K`` for ``i < k < m`` and ``c_m = 1 + dT K``."""
        out = {k: delta_t * self.strike for k in range(self.i + 1, self.m)}
        out[self.m] = 1.0 + delta_t * self.strike
        return out

    def check(self, family: MartingaleFamily):
        if self.m > family.n_tenors:
            raise IndexError(f"swap end index {self.m} beyond the last tenor {family.n_tenors}")


@dataclass(frozen=True)
class CumulantSet:
    """Cumulants ``kappa_1..kappa_order`` of ``CB(T_i)`` under ``P_{T_k}``."""

    cumulants: tuple
    measure_index: int = 0
    exact: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.cumulants) < 2:
            raise ValueError("need at least two cumulants")
        if not self.cumulants[1] > 0:
            raise DegenerateDistribution(f"second cumulant {self.cumulants[1]} is not positive")

    @property
    def order(self) -> int:
        return len(self.cumulants)

    def truncate(self, order: int) -> "CumulantSet":
        return CumulantSet(self.cumulants[:order], self.measure_index, self.exact[:order])


class _MomentEngine:
    """Exact coupon-bond moments for one ``(model, family, spec)`` at fixed precision."""

    def __init__(self, model: Model, family: MartingaleFamily, spec: SwaptionSpec, dps: int = DEFAULT_DPS):
        spec.check(family)
        self.spec = spec
        self.family = family
        self.dps = dps
        with mpmath.workdps(dps):
            t_i = family.curve.maturity(spec.i)
            self.at_expiry = MpTransform(model, family.horizon - t_i)
            self.to_expiry = MpTransform(model, t_i)
            self.coupons = {k: mpmath.mpf(c) for k, c in spec.coupons(family.delta_t).items()}
            idx = sorted(set(self.coupons) | {spec.i})
            self.phi, self.psi = {}, {}
            for k in idx:
                out = self.at_expiry.coeffs(_to_mp(family.u(k)))
                if out is None:
                    raise TransformBlowUp(f"transform infinite at u_{k}")
                self.phi[k], self.psi[k] = out
        self._cache: dict = {}

    def log_m0(self, k: int):
        key = ("m0", k)
        if key not in self._cache:
            # through T_i with the same split as the moments, so the density has mass exactly one
            inner = self.to_expiry.log_laplace(self.psi[k])
            val = None if inner is None else inner - self.phi[k]
            if val is None:
                raise TransformBlowUp(f"transform infinite at u_{k}")
            self._cache[key] = val
        return self._cache[key]

    def moment(self, q: int, k: int):
        """``E^{P_{T_k}}[CB(T_i)^q]`` as an ``mpf``."""
        key = (q, k)
        if key in self._cache:
            return self._cache[key]
        i = self.spec.i
        if q == 0:
            return mpmath.mpf(1)
        with mpmath.workdps(self.dps):
            # density M^{u_k}_{T_i} / M^{u_k}_0 folded into the exponent
            base_phi = -self.phi[k] - self.log_m0(k) + q * self.phi[i]
            base_psi = self.psi[k] - q * self.psi[i]
            total = mpmath.mpf(0)
            qfact = math.factorial(q)
            for combo in itertools.combinations_with_replacement(sorted(self.coupons), q):
                counts = {j: combo.count(j) for j in set(combo)}
                weight = qfact
                for n_j in counts.values():
                    weight //= math.factorial(n_j)
                coef = mpmath.mpf(weight)
                phi = base_phi
                psi = base_psi
                for j, n_j in counts.items():
                    coef *= self.coupons[j] ** n_j
                    phi -= n_j * self.phi[j]
                    psi = psi + n_j * self.psi[j]
                inner = self.to_expiry.log_laplace(psi)
                if inner is None:
                    raise TransformBlowUp(f"moment of order {q} under P_T{k} leaves the transform domain")
                total += coef * mpmath.exp(phi + inner)
        self._cache[key] = total
        return total

    def cumulants(self, order: int, k: int) -> CumulantSet:
        with mpmath.workdps(self.dps):
            moments = [self.moment(q, k) for q in range(1, order + 1)]
            return moments_to_cumulants(moments, measure_index=k)


def coupon_bond_moment(model: Model, family: MartingaleFamily, spec: SwaptionSpec, q: int, measure_k: int,
                       dps: int = DEFAULT_DPS) -> float:
    """``E^{P_{T_k}}[CB(T_i)^q]`` for ``k`` in ``{i, ..., m}``."""
    if not (isinstance(q, (int, np.integer)) and 1 <= q <= MAX_ORDER):
        raise ValueError(f"moment order must be in [1, {MAX_ORDER}]")
    if not spec.i <= measure_k <= spec.m:
        raise IndexError(f"measure index {measure_k} outside [{spec.i}, {spec.m}]")
    return float(_MomentEngine(model, family, spec, dps).moment(q, measure_k))


def moments_to_cumulants(moments, measure_index: int = 0) -> CumulantSet:
    """Raw moments ``m_1..m_n`` to cumulants via ``k_n = m_n - sum_j C(n-1, j-1) k_j m_{n-j}``.

    ``mpmath`` inputs are processed at the current working precision; the exact
    values are kept alongside the float cumulants.
    """
    ms = [mpmath.mpf(x) if not isinstance(x, mpmath.mpf) else x for x in moments]
    if len(ms) < 2:
        raise ValueError("need at least two moments")
    kap = []
    for n in range(1, len(ms) + 1):
        val = ms[n - 1]
        for j in range(1, n):
            val -= math.comb(n - 1, j - 1) * kap[j - 1] * ms[n - j - 1]
        kap.append(val)
    if not kap[1] > 0:
        raise DegenerateDistribution(f"second cumulant {float(kap[1]):.3e} is not positive")
    return CumulantSet(tuple(float(x) for x in kap), measure_index, tuple(kap))


def _series_coefficients(lams: dict[int, float], order: int) -> np.ndarray:
    """Hermite coefficients ``a_n`` of the Edgeworth series using ``lam_3..lam_order``.

    ``exp(sum_{j>=3} lam_j s^j / j!)`` is expanded with ``lam_j`` carrying
    ``eps^{j-2}`` and truncated at ``eps^{order-2}``, so products such as
    ``lam_3^2`` enter together with ``lam_4``. Returns ``a`` indexed by the power of ``s``.
    """
    top = max(order - 2, 0)
    width = 3 * top + 1
    f = [np.zeros(width) for _ in range(top + 1)]
    for r in range(1, top + 1):
        f[r][r + 2] = lams.get(r + 2, 0.0) / math.factorial(r + 2)
    # exp of a power series in eps: r e_r = sum_j j f_j e_{r-j}
    e = [np.zeros(width) for _ in range(top + 1)]
    e[0][0] = 1.0
    for r in range(1, top + 1):
        acc = np.zeros(width)
        for j in range(1, r + 1):
            acc += j * np.convolve(f[j], e[r - j])[:width]
        e[r] = acc / r
    return np.sum(e, axis=0)


def _hermite_e(n: int, x: float) -> float:
    """Probabilists' Hermite polynomial ``He_n(x)``."""
    if n == 0:
        return 1.0
    h0, h1 = 1.0, x
    for k in range(1, n):
        h0, h1 = h1, x * h1 - k * h0
    return h1


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    clamped: bool
    z: float


def edgeworth_tail_detail(cs: CumulantSet, threshold: float = 1.0) -> TailEstimate:
    if not math.isfinite(threshold):
        return TailEstimate(1.0 if threshold < 0 else 0.0, False, -threshold)
    k1, k2 = cs.cumulants[0], cs.cumulants[1]
    if not k2 > 0:
        raise DegenerateDistribution("second cumulant is not positive")
    sd = math.sqrt(k2)
    z = (threshold - k1) / sd
    if cs.exact:
        with mpmath.workdps(max(mpmath.mp.dps, 30)):
            z = float((mpmath.mpf(threshold) - cs.exact[0]) / mpmath.sqrt(cs.exact[1]))
    lams = {j: cs.cumulants[j - 1] / sd ** j for j in range(3, cs.order + 1)}
    a = _series_coefficients(lams, cs.order)
    dens = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    p = float(ndtr(-z)) + dens * sum(a[n] * _hermite_e(n - 1, z) for n in range(3, a.size) if a[n] != 0.0)
    clamped = not 0.0 <= p <= 1.0
    return TailEstimate(min(max(p, 0.0), 1.0), clamped, z)


def edgeworth_tail(cs: CumulantSet, threshold: float = 1.0) -> float:
    """Edgeworth approximation of ``P[X > threshold]`` from ``cs``, clamped to ``[0, 1]``."""
    return edgeworth_tail_detail(cs, threshold).probability


@dataclass(frozen=True)
class SwaptionResult:
    price: float
    receiver: float
    probabilities: dict
    clamped: bool


def swaption_breakdown(model: Model, family: MartingaleFamily, spec: SwaptionSpec, order: int = MAX_ORDER,
                       dps: int = DEFAULT_DPS, engine: _MomentEngine | None = None) -> SwaptionResult:
    if not 2 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}]")
    engine = engine or _MomentEngine(model, family, spec, dps)
    curve = family.curve
    coupons = spec.coupons(family.delta_t)
    probs = {}
    clamped = False
    for k in [spec.i] + sorted(coupons):
        tail = edgeworth_tail_detail(engine.cumulants(order, k))
        probs[k] = tail.probability
        clamped |= tail.clamped
    receiver = sum(c * curve.bond(k) * probs[k] for k, c in coupons.items()) - curve.bond(spec.i) * probs[spec.i]
    if receiver < 0:
        clamped = True
        receiver = 0.0
    if spec.side == "receiver":
        price = receiver
    else:
        swap = sum(c * curve.bond(k) for k, c in coupons.items()) - curve.bond(spec.i)
        price = receiver - swap
        if price < 0:
            clamped = True
            price = 0.0
    if clamped:
        warnings.warn("tail expansion left [0, 1] or gave a negative price; clamped", ClippingWarning, stacklevel=2)
    return SwaptionResult(spec.notional * price, spec.notional * receiver, probs, clamped)


def price_swaption(model: Model, family: MartingaleFamily, spec: SwaptionSpec, order: int = MAX_ORDER,
                   dps: int = DEFAULT_DPS) -> float:
    """Swaption price from the order-``order`` cumulant expansion of the coupon bond."""
    return swaption_breakdown(model, family, spec, order, dps).price


def forward_swap_rate(curve, i: int, m: int) -> float:
    """Par rate of the swap over ``(T_i, T_m]``: ``(B(0,T_i) - B(0,T_m)) / annuity``."""
    return (curve.bond(i) - curve.bond(m)) / annuity(curve, i, m)


def annuity(curve, i: int, m: int) -> float:
    return curve.delta_t * sum(curve.bond(k) for k in range(i + 1, m + 1))
