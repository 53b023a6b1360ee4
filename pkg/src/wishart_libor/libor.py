"""Libor curve layer: martingales above one, curve fitting and forward prices.

Bond ratios are modelled as ``B(t,T_k)/B(t,T_N) = M^{u_k}_t`` with

    M^u_t = exp(-phi_{T_N - t}(u) - tr[psi_{T_N - t}(u) S_t]),

``u_1 < u_2 < ... < u_{N-1} < u_N = 0`` negative definite. Tenor indices are
1-based throughout (``T_k = k * delta_t``) to keep ``u_N = 0`` readable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .affine import Model, coeffs, log_laplace
from .errors import InsufficientMass, InvalidCurve, InvalidTime, NotSPD, TransformBlowUp


@dataclass(frozen=True, eq=False)
class TenorCurve:
    """Initial term structure on the grid ``T_k = k * delta_t``, ``k = 1..N``.

    ``bond_ratios[k-1] = B(0,T_k) / B(0,T_N)``.
    """

    delta_t: float
    bond_ratios: np.ndarray
    terminal_bond: float

    def __post_init__(self):
        ratios = np.array(self.bond_ratios, dtype=float)
        if ratios.ndim != 1 or ratios.size < 2:
            raise InvalidCurve("need at least two tenor dates")
        if not self.delta_t > 0:
            raise InvalidCurve("delta_t must be positive")
        if not 0 < self.terminal_bond:
            raise InvalidCurve("terminal bond price must be positive")
        if abs(ratios[-1] - 1.0) > 1e-14:
            raise InvalidCurve("last bond ratio must equal 1")
        if not np.all(np.diff(ratios) < 0):
            raise InvalidCurve("bond ratios must be strictly decreasing (positive initial Libor rates)")
        ratios[-1] = 1.0
        ratios.setflags(write=False)
        object.__setattr__(self, "bond_ratios", ratios)
        object.__setattr__(self, "delta_t", float(self.delta_t))
        object.__setattr__(self, "terminal_bond", float(self.terminal_bond))

    @classmethod
    def from_libor(cls, delta_t: float, rates) -> "TenorCurve":
        """Build from ``L(0,T_l)``, ``l = 1..N``, the rate for the period ``[T_{l-1}, T_l]`` (``T_0 = 0``)."""
        growth = 1.0 + delta_t * np.asarray(rates, dtype=float)
        if np.any(growth <= 1.0):
            raise InvalidCurve("initial Libor rates must be positive")
        # ratio_k = prod_{l=k+1}^{N} (1 + dT L_l)
        tail = np.cumprod(growth[::-1])[::-1]
        ratios = np.append(tail[1:], 1.0)
        return cls(delta_t, ratios, float(1.0 / np.prod(growth)))

    @classmethod
    def flat(cls, delta_t: float, n_tenors: int, rate: float) -> "TenorCurve":
        return cls.from_libor(delta_t, np.full(n_tenors, rate))

    @property
    def n_tenors(self) -> int:
        return self.bond_ratios.size

    @property
    def maturities(self) -> np.ndarray:
        return self.delta_t * np.arange(1, self.n_tenors + 1)

    def maturity(self, k: int) -> float:
        return k * self.delta_t

    def ratio(self, k: int) -> float:
        if not 1 <= k <= self.n_tenors:
            raise IndexError(f"tenor index {k} outside [1, {self.n_tenors}]")
        return float(self.bond_ratios[k - 1])

    def bond(self, k: int) -> float:
        """``B(0, T_k)``; ``k = 0`` gives 1."""
        if k == 0:
            return 1.0
        return self.terminal_bond * self.ratio(k)

    def forward_libor(self, k: int) -> float:
        """Forward rate for ``[T_k, T_{k+1}]`` implied by the curve."""
        if not 0 <= k < self.n_tenors:
            raise IndexError(f"forward index {k} outside [0, {self.n_tenors - 1}]")
        return (self.bond(k) / self.bond(k + 1) - 1.0) / self.delta_t

    def libor_rates(self) -> np.ndarray:
        """``L(0,T_l)`` for ``l = 1..N`` (inverse of ``from_libor``)."""
        bonds = np.concatenate([[1.0], self.terminal_bond * self.bond_ratios])
        return (bonds[:-1] / bonds[1:] - 1.0) / self.delta_t


@dataclass(frozen=True, eq=False)
class MartingaleFamily:
    """Fitted ``u_k = xi_k * base_direction`` with ``1 > xi_1 > ... > xi_{N-1} > xi_N = 0``."""

    curve: TenorCurve
    base_direction: np.ndarray
    xis: np.ndarray
    scale: float = float("nan")
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_tenors(self) -> int:
        return self.curve.n_tenors

    @property
    def horizon(self) -> float:
        return self.curve.maturity(self.n_tenors)

    @property
    def delta_t(self) -> float:
        return self.curve.delta_t

    def u(self, k: int) -> np.ndarray:
        self._check_index(k, 1, self.n_tenors)
        return self.xis[k - 1] * self.base_direction

    def u_mats(self) -> np.ndarray:
        return self.xis[:, None, None] * self.base_direction

    def _check_index(self, k, lo, hi):
        if not (isinstance(k, (int, np.integer)) and lo <= k <= hi):
            raise IndexError(f"tenor index {k} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class ForwardCoeffs:
    """``B(t,T_k)/B(t,T_{k+1}) = exp(a + tr[b S_t])``."""

    a: float
    b: np.ndarray
    k: int
    t: float


def _log_f(model: Model, horizon: float, base: np.ndarray, xi: float) -> float:
    return float(log_laplace(model, horizon, xi * base))


def fit_term_structure(
    model: Model,
    curve: TenorCurve,
    base_direction=None,
    *,
    auto_scale: bool = True,
    start_scale: float = 0.01,
    max_doublings: int = 60,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> MartingaleFamily:
    """Find ``xi_k`` with ``E[exp(-tr[xi_k u S_T])] = B(0,T_k)/B(0,T_N)``.

    ``base_direction=None`` uses ``-c I`` with ``c`` doubled from ``start_scale``
    until the first bond ratio is reachable. An explicit direction is scaled the
    same way when ``auto_scale`` is true; otherwise ``InsufficientMass`` is
    raised if it is too small.
    """
    d = model.dim
    horizon = curve.maturity(curve.n_tenors)
    if base_direction is None:
        base = -np.eye(d)
        scale = start_scale
    else:
        base = matcore.sym(base_direction)
        if np.linalg.eigvalsh(base)[-1] >= 0:
            raise ValueError("base direction must be negative definite")
        scale = 1.0
    target = np.log(curve.bond_ratios)

    for _ in range(max_doublings + 1):
        top = _log_f(model, horizon, scale * base, 1.0)
        if not math.isfinite(top):
            raise TransformBlowUp(f"transform infinite at base direction scaled by {scale:g}")
        if top > target[0]:
            break
        if not auto_scale:
            raise InsufficientMass(
                f"E[exp(-tr[u S_T])] = {math.exp(top):.6g} does not exceed B(0,T_1)/B(0,T_N) = {curve.ratio(1):.6g}"
            )
        scale *= 2.0
    else:
        raise InsufficientMass(f"first bond ratio unreachable after {max_doublings} doublings")
    base = scale * base

    xis = np.zeros(curve.n_tenors)
    hi = 1.0
    for k in range(1, curve.n_tenors):
        goal = target[k - 1]
        lo_x, hi_x = 0.0, hi
        for _ in range(max_iter):
            mid = 0.5 * (lo_x + hi_x)
            if mid in (lo_x, hi_x):
                break
            val = _log_f(model, horizon, base, mid)
            if val < goal:
                lo_x = mid
            else:
                hi_x = mid
            if abs(val - goal) <= 0.1 * tol and hi_x - lo_x < 1e-15:
                break
        cand = (lo_x, hi_x)
        errs = [abs(_log_f(model, horizon, base, x) - goal) for x in cand]
        xi = cand[int(np.argmin(errs))]
        xis[k - 1] = xi
        hi = xi
    if not np.all(np.diff(xis) < 0):
        raise InvalidCurve("fitted xi sequence is not strictly decreasing")
    resid = np.array([math.expm1(_log_f(model, horizon, base, x) - g) for x, g in zip(xis, target)])
    return MartingaleFamily(curve, base, xis, float(scale), resid)


def _check_time(family: MartingaleFamily, t: float, upper: float | None = None):
    upper = family.horizon if upper is None else upper
    if not (0.0 <= t <= upper + 1e-12):
        raise InvalidTime(f"t={t} outside [0, {upper}]")


def _check_state(sigma_t) -> np.ndarray:
    s = matcore.sym(sigma_t)
    if np.any(np.linalg.eigvalsh(s)[..., 0] <= 0):
        raise NotSPD("state must be positive definite")
    return s


def log_martingale(model: Model, family: MartingaleFamily, t: float, k, sigma_t) -> np.ndarray:
    """``log M^{u_k}_t`` for one or several ``k`` and a batch of states."""
    tau = max(family.horizon - t, 0.0)
    ks = np.atleast_1d(k)
    u = family.xis[ks - 1][:, None, None] * family.base_direction
    phi, psi, valid = coeffs(model, tau, u)
    if not np.all(valid):
        raise TransformBlowUp("martingale transform infinite")
    s = np.asarray(sigma_t)
    out = -phi - np.einsum("kij,...ji->...k", psi, s)
    return out if np.ndim(k) else out[..., 0]


def martingale_value(model: Model, family: MartingaleFamily, t: float, k: int, sigma_t) -> float:
    family._check_index(k, 1, family.n_tenors)
    _check_time(family, t)
    s = _check_state(sigma_t)
    if k == family.n_tenors:
        return np.ones(s.shape[:-2]) if s.ndim > 2 else 1.0
    val = np.exp(log_martingale(model, family, t, k, s))
    return val if np.ndim(val) else float(val)


def forward_coeffs(model: Model, family: MartingaleFamily, k: int, t: float) -> ForwardCoeffs:
    """``A = -phi(u_k) + phi(u_{k+1})``, ``B = -psi(u_k) + psi(u_{k+1})`` at ``T_N - t``.

    The bond ratio stays defined after the fixing ``T_k``, so any ``t <= T_N`` is accepted.
    """
    family._check_index(k, 1, family.n_tenors - 1)
    _check_time(family, t)
    tau = max(family.horizon - t, 0.0)
    u = np.stack([family.u(k), family.u(k + 1)])
    phi, psi, valid = coeffs(model, tau, u)
    if not np.all(valid):
        raise TransformBlowUp("forward coefficient transform infinite")
    a = float(phi[1] - phi[0])
    b = matcore.sym(psi[1] - psi[0])
    if np.linalg.eigvalsh(b)[0] < -1e-12 * max(1.0, np.abs(b).max()):
        raise ArithmeticError("forward loading is not positive semidefinite")
    return ForwardCoeffs(a, b, k, float(t))


def libor_rate(model: Model, family: MartingaleFamily, k: int, t: float, sigma_t):
    """Forward Libor for ``[T_k, T_{k+1}]`` seen at ``t`` in state ``sigma_t``."""
    fc = forward_coeffs(model, family, k, t)
    s = _check_state(sigma_t)
    val = np.expm1(fc.a + matcore.tr(fc.b, s)) / family.delta_t
    return val if np.ndim(val) else float(val)


def radon_nikodym(model: Model, family: MartingaleFamily, k: int, t: float, sigma_t):
    """Density ``dP_{T_k}/dP_{T_N}`` on ``F_t``: ``M^{u_k}_t / M^{u_k}_0``."""
    family._check_index(k, 1, family.n_tenors)
    _check_time(family, t)
    s = _check_state(sigma_t)
    if k == family.n_tenors:
        return np.ones(s.shape[:-2]) if s.ndim > 2 else 1.0
    val = np.exp(log_martingale(model, family, t, k, s) - log_martingale(model, family, 0.0, k, model.sigma0))
    return val if np.ndim(val) else float(val)
