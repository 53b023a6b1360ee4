"""Affine transforms of the two driving processes on positive definite matrices.

Both processes satisfy, for real symmetric ``u`` in the transform domain,

    E[exp(-tr[u S_tau]) | S_0] = exp(-phi_tau(u) - tr[psi_tau(u) S_0]).

The Wishart diffusion has ``phi``/``psi`` in closed form through the
exponential of the 2d x 2d block matrix ``[[M, 2 Q^T Q], [0, -M^T]]``. The
pure-jump Ornstein-Uhlenbeck process has ``psi`` in closed form and ``phi`` as
a time integral of the jump-size Laplace transform.

Complex arguments are supported everywhere. The logarithm inside ``phi`` is
continued analytically along the segment from ``0`` to ``u``, which is the
right branch whenever ``Re(u)`` lies in the (convex) real transform domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import mpmath
import numpy as np

from . import matcore
from .errors import InvalidParameters, NegativeTau, Singular


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WishartParams:
    """Wishart diffusion ``dS = (kappa Q^T Q + M S + S M^T) dt + sqrt(S) dW Q + Q^T dW^T sqrt(S)``."""

    sigma0: np.ndarray
    m: np.ndarray
    q: np.ndarray
    kappa: float
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        sigma0 = _frozen(matcore.sym(self.sigma0))
        m = _frozen(matcore.square(self.m))
        q = _frozen(matcore.square(self.q))
        d = sigma0.shape[0]
        if m.shape != (d, d) or q.shape != (d, d):
            raise InvalidParameters("sigma0, m and q must share the same dimension")
        if not matcore.is_spd(sigma0):
            raise InvalidParameters("sigma0 must be positive definite")
        if np.max(np.linalg.eigvals(m).real) >= 0:
            raise InvalidParameters("m must have eigenvalues with negative real part")
        if abs(np.linalg.det(q)) < 1e-300:
            raise InvalidParameters("q must be invertible")
        kappa = float(self.kappa)
        if not kappa >= d + 1:
            raise InvalidParameters(f"kappa={kappa} violates the Gindikin bound kappa >= d + 1 = {d + 1}")
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "kappa", kappa)

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    @property
    def qtq(self) -> np.ndarray:
        return self.q.T @ self.q

    def propagator(self, tau: float):
        """Blocks of ``exp(tau [[M, 2Q^TQ], [0, -M^T]])`` reduced to ``(left, g, right)``.

        With ``E11, E12, E22`` the blocks, ``psi = left (I + u g)^{-1} u right`` where
        ``left = E22^{-1}``, ``right = E11`` and ``g = E12 E22^{-1}``.
        """
        key = float(tau)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        d = self.dim
        block = np.zeros((2 * d, 2 * d))
        block[:d, :d] = self.m
        block[:d, d:] = 2.0 * self.qtq
        block[d:, d:] = -self.m.T
        e = matcore.expm(key * block)
        e11, e12, e22 = e[:d, :d], e[:d, d:], e[d:, d:]
        left = np.linalg.inv(e22)
        g = matcore.sym(e12 @ left)
        out = (left, g, e11)
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = out
        return out

    def long_run_mean(self) -> np.ndarray:
        """Stationary mean ``S_inf`` solving ``M S + S M^T + kappa Q^T Q = 0``."""
        return matcore.solve_lyapunov(self.m, self.kappa * self.qtq)


@dataclass(frozen=True)
class WishartJumps:
    """Central Wishart jump law ``Wis_d(n, calq)`` (mean ``n calq``)."""

    n: float
    calq: np.ndarray

    def __post_init__(self):
        calq = _frozen(matcore.sym(self.calq))
        if not matcore.is_spd(calq):
            raise InvalidParameters("calq must be positive definite")
        if not float(self.n) > calq.shape[0] - 1:
            raise InvalidParameters("degrees of freedom n must exceed d - 1")
        object.__setattr__(self, "calq", calq)
        object.__setattr__(self, "n", float(self.n))

    def log_laplace(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``log E[exp(-tr[w J])]`` for a batch of (complex) symmetric ``w``."""
        logdet, bad = matcore.log1p_eig_sum(2.0 * w @ self.calq)
        return -0.5 * self.n * logdet, bad

    def mean(self) -> np.ndarray:
        return self.n * self.calq


@dataclass(frozen=True)
class NonCentralWishartJumps:
    """Non-central Wishart law: ``J = sum_j x_j x_j^T``, ``x_j ~ N(mu_j, calq)``, ``calm = [mu_j]``.

    Only ``calm calm^T`` enters the law; ``calm`` may be ``d x p`` for any ``p``.
    """

    n: float
    calq: np.ndarray
    calm: np.ndarray

    def __post_init__(self):
        calq = _frozen(matcore.sym(self.calq))
        calm = np.array(self.calm, dtype=float)
        if calm.ndim != 2 or calm.shape[0] != calq.shape[0]:
            raise InvalidParameters("calm must have d rows")
        if not matcore.is_spd(calq):
            raise InvalidParameters("calq must be positive definite")
        if not float(self.n) > calq.shape[0] - 1:
            raise InvalidParameters("degrees of freedom n must exceed d - 1")
        object.__setattr__(self, "calq", calq)
        object.__setattr__(self, "calm", _frozen(calm))
        object.__setattr__(self, "n", float(self.n))

    def log_laplace(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.calq.shape[0]
        logdet, bad = matcore.log1p_eig_sum(2.0 * w @ self.calq)
        qinv = np.linalg.inv(self.calq)
        theta = qinv @ self.calm @ self.calm.T
        # (2w + Q^{-1})^{-1} = (I + 2 Q w)^{-1} Q
        inner = np.linalg.solve(np.eye(d) + 2.0 * self.calq @ w, np.broadcast_to(self.calq, w.shape))
        shift = -0.5 * np.trace(theta) + 0.5 * matcore.tr(theta @ qinv, inner)
        return -0.5 * self.n * logdet + shift, bad

    def mean(self) -> np.ndarray:
        return self.n * self.calq + self.calm @ self.calm.T


JumpLaw = Union[WishartJumps, NonCentralWishartJumps]


@dataclass(frozen=True, eq=False)
class JumpOUParams:
    """Pure-jump OU process ``dS = (M S + S M^T) dt + dL`` with compound Poisson ``L``."""

    sigma0: np.ndarray
    m: np.ndarray
    lam: float
    jump_law: JumpLaw
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        sigma0 = _frozen(matcore.sym(self.sigma0))
        m = _frozen(matcore.square(self.m))
        d = sigma0.shape[0]
        if m.shape != (d, d) or self.jump_law.calq.shape != (d, d):
            raise InvalidParameters("sigma0, m and the jump law must share the same dimension")
        if not matcore.is_spd(sigma0):
            raise InvalidParameters("sigma0 must be positive definite")
        if np.max(np.linalg.eigvals(m).real) >= 0:
            raise InvalidParameters("m must have eigenvalues with negative real part")
        if not float(self.lam) >= 0:
            raise InvalidParameters("jump intensity must be nonnegative")
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    def flow(self, s) -> np.ndarray:
        """``exp(M s)`` for scalar or array ``s`` (cached per time)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s_arr.shape + (self.dim, self.dim))
        for idx, si in np.ndenumerate(s_arr):
            key = float(si)
            hit = self._cache.get(key)
            if hit is None:
                if len(self._cache) > 4096:
                    self._cache.clear()
                hit = self._cache[key] = matcore.expm(key * self.m)
            out[idx] = hit
        return out if np.ndim(s) else out[0]


Model = Union[WishartParams, JumpOUParams]


@dataclass(frozen=True)
class AffineCoeffs:
    phi: complex
    psi: np.ndarray
    tau: float
    valid: bool
    phase: float = 0.0


# ---------------------------------------------------------------- Wishart


def wishart_coeffs(params: WishartParams, tau: float, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched ``(phi, psi, valid)`` for ``u`` of shape ``(..., d, d)``."""
    if tau < 0:
        raise NegativeTau(f"tau={tau} < 0")
    u = np.asarray(u)
    if tau == 0:
        return np.zeros(u.shape[:-2], dtype=u.dtype), u.copy(), np.ones(u.shape[:-2], dtype=bool)
    left, g, right = params.propagator(tau)
    a = u @ g
    logdet, bad = matcore.log1p_eig_sum(a)
    phi = 0.5 * params.kappa * logdet
    eye = np.eye(params.dim)
    lhs = eye + a
    if np.any(bad):
        lhs = np.where(bad[..., None, None], eye, lhs)
    psi = left @ np.linalg.solve(lhs, u) @ right
    psi = 0.5 * (psi + np.swapaxes(psi, -1, -2))
    if np.any(bad):
        phi = np.where(bad, np.nan, phi)
        psi = np.where(bad[..., None, None], np.nan, psi)
    if not np.iscomplexobj(u):
        phi = phi.real
        psi = psi.real
    return phi, psi, ~bad


def wishart_psi_phi(params: WishartParams, tau: float, u, prev_phase: float | None = None) -> AffineCoeffs:
    """``phi_tau(u)``, ``psi_tau(u)`` for a single (possibly complex) symmetric ``u``.

    With ``prev_phase`` given, the imaginary part of the log-determinant is
    unwrapped next to it instead of being taken from the straight-line
    continuation; the returned ``phase`` can be fed to the next grid point.
    """
    u = np.asarray(u)
    if u.shape != (params.dim, params.dim):
        raise ValueError(f"u must be {params.dim}x{params.dim}")
    phi, psi, valid = wishart_coeffs(params, tau, u)
    phi = complex(phi)
    if prev_phase is not None and valid and tau > 0:
        _, g, _ = params.propagator(tau)
        try:
            logdet, _ = matcore.logdet_tracked(np.eye(params.dim) + u @ g, prev_phase)
        except Singular:
            return AffineCoeffs(complex("nan"), psi, float(tau), False, prev_phase)
        phi = 0.5 * params.kappa * logdet
    phase = (2.0 * phi / params.kappa).imag
    return _pack(phi, psi, tau, bool(valid), phase, np.iscomplexobj(u))


def _pack(phi, psi, tau, valid, phase, is_complex) -> AffineCoeffs:
    if not is_complex and valid:
        return AffineCoeffs(float(np.real(phi)), np.real(psi), float(tau), valid, 0.0)
    return AffineCoeffs(complex(phi), psi, float(tau), valid, float(phase))


def _riccati_rk4(params: WishartParams, tau: float, u, n_steps: int = 2000) -> tuple[complex, np.ndarray]:
    """Integrate the Wishart Riccati system with classical RK4 (cross-check only)."""
    m, qtq, kappa = params.m, params.qtq, params.kappa

    def rhs(psi):
        return psi @ m + m.T @ psi - 2.0 * psi @ qtq @ psi, kappa * np.trace(qtq @ psi)

    psi = np.array(u, dtype=complex if np.iscomplexobj(u) else float)
    phi = 0.0
    h = tau / n_steps
    for _ in range(n_steps):
        k1, l1 = rhs(psi)
        k2, l2 = rhs(psi + 0.5 * h * k1)
        k3, l3 = rhs(psi + 0.5 * h * k2)
        k4, l4 = rhs(psi + h * k3)
        psi = psi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        phi = phi + h / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
    return phi, psi


# ---------------------------------------------------------------- pure-jump OU

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_QUAD_TOL = 1e-12
_QUAD_MAX_NODES = 2 ** 14


def _composite_gl(tau: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, tau, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def jump_coeffs(params: JumpOUParams, tau: float, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched ``(phi, psi, valid)`` for the pure-jump OU process.

    ``phi = lam tau - lam int_0^tau L_J(psi_s(u)) ds`` by composite Gauss-Legendre,
    doubling the panel count until successive estimates agree to 1e-12.
    """
    if tau < 0:
        raise NegativeTau(f"tau={tau} < 0")
    u = np.asarray(u)
    batch = u.shape[:-2]
    if tau == 0:
        return np.zeros(batch, dtype=u.dtype), u.copy(), np.ones(batch, dtype=bool)
    e = params.flow(tau)
    psi = e.T @ u @ e
    psi = 0.5 * (psi + np.swapaxes(psi, -1, -2))
    if params.lam == 0 or not np.any(u):
        return np.zeros(batch, dtype=u.dtype), psi, np.ones(batch, dtype=bool)

    def integral(panels):
        nodes, weights = _composite_gl(tau, panels)
        ems = params.flow(nodes)  # (n, d, d)
        w = np.swapaxes(ems, -1, -2) @ u[..., None, :, :] @ ems  # (..., n, d, d)
        log_l, bad = params.jump_law.log_laplace(w)
        vals = np.exp(np.where(bad, 0.0, log_l))
        return vals @ weights, np.any(bad, axis=-1)

    panels = 1
    prev, bad = integral(panels)
    while True:
        panels *= 2
        cur, bad = integral(panels)
        err = np.max(np.abs(cur - prev)) if cur.size else 0.0
        if err <= _QUAD_TOL or panels * len(_GL_NODES) >= _QUAD_MAX_NODES:
            break
        prev = cur
    phi = params.lam * tau - params.lam * cur
    if np.any(bad):
        phi = np.where(bad, np.nan, phi)
    if not np.iscomplexobj(u):
        phi = np.real(phi)
    return phi, psi, ~bad


def jump_psi_phi(params: JumpOUParams, tau: float, u) -> AffineCoeffs:
    u = np.asarray(u)
    if u.shape != (params.dim, params.dim):
        raise ValueError(f"u must be {params.dim}x{params.dim}")
    phi, psi, valid = jump_coeffs(params, tau, u)
    return _pack(complex(phi), psi, tau, bool(valid), complex(phi).imag, np.iscomplexobj(u))


# ---------------------------------------------------------------- generic


def coeffs(model: Model, tau: float, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched ``(phi, psi, valid)`` for either process type."""
    if isinstance(model, WishartParams):
        return wishart_coeffs(model, tau, u)
    if isinstance(model, JumpOUParams):
        return jump_coeffs(model, tau, u)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def log_laplace(model: Model, t: float, u, sigma=None) -> np.ndarray:
    """Batched ``-phi_t(u) - tr[psi_t(u) sigma]`` (``sigma`` defaults to ``model.sigma0``).

    Entries outside the transform domain are ``+inf``.
    """
    sigma = model.sigma0 if sigma is None else np.asarray(sigma)
    phi, psi, valid = coeffs(model, t, u)
    out = -phi - matcore.tr(psi, sigma)
    if np.all(valid):
        return out
    return np.where(valid, out, np.inf)


def laplace(model: Model, t: float, u) -> complex | float:
    """``E[exp(-tr[u S_t])]``; returns ``inf`` when the transform is infinite at ``u``."""
    u = np.asarray(u)
    val = log_laplace(model, t, u)
    if not np.isfinite(val.real):
        return math.inf
    out = np.exp(val)
    return complex(out) if np.iscomplexobj(u) else float(out)


# ---------------------------------------------------------------- extended precision
#
# The coupon-bond moment engine combines many exponentials whose central
# moments are orders of magnitude smaller than the raw moments, so it works in
# mpmath at the caller's working precision. Only real arguments are needed.


def _to_mp(a) -> mpmath.matrix:
    return mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in np.asarray(a, dtype=float)])


class MpTransform:
    """``phi_tau``/``psi_tau`` at one horizon for real arguments, in mpmath precision."""

    def __init__(self, model: Model, tau: float, quad_panels: int = 4, quad_nodes: int = 24):
        self.model = model
        self.tau = mpmath.mpf(float(tau))
        self.d = model.dim
        self.eye = mpmath.eye(self.d)
        self.sigma0 = _to_mp(model.sigma0)
        if isinstance(model, WishartParams):
            d = self.d
            block = mpmath.zeros(2 * d, 2 * d)
            m = _to_mp(model.m)
            qtq = _to_mp(model.q).T * _to_mp(model.q)
            for i in range(d):
                for j in range(d):
                    block[i, j] = m[i, j] * self.tau
                    block[i, d + j] = 2 * qtq[i, j] * self.tau
                    block[d + i, d + j] = -m[j, i] * self.tau
            e = mpmath.expm(block) if self.tau != 0 else mpmath.eye(2 * d)
            e11 = e[0:d, 0:d]
            e12 = e[0:d, d:2 * d]
            e22 = e[d:2 * d, d:2 * d]
            self.left = mpmath.inverse(e22)
            self.g = e12 * self.left
            self.right = e11
            self.kappa = mpmath.mpf(model.kappa)
        elif isinstance(model, JumpOUParams):
            m = _to_mp(model.m)
            self.flow_tau = mpmath.expm(m * self.tau)
            law = model.jump_law
            self.lam = mpmath.mpf(model.lam)
            self.n = mpmath.mpf(law.n)
            self.calq = _to_mp(law.calq)
            if isinstance(law, NonCentralWishartJumps):
                calm = _to_mp(law.calm)
                qinv = mpmath.inverse(self.calq)
                self.theta = qinv * calm * calm.T
                self.theta_qinv = self.theta * qinv
                self.tr_theta = sum(self.theta[i, i] for i in range(self.d))
            else:
                self.theta = None
            xs, ws = _mp_leggauss(quad_nodes)
            self.nodes = []
            self.weights = []
            h = self.tau / quad_panels
            for p in range(quad_panels):
                mid = h * (p + mpmath.mpf(1) / 2)
                for x, w in zip(xs, ws):
                    s = mid + h / 2 * x
                    self.nodes.append(mpmath.expm(m * s))
                    self.weights.append(h / 2 * w)
        else:
            raise TypeError(f"unsupported model type {type(model).__name__}")

    def coeffs(self, u: mpmath.matrix) -> tuple:
        if self.tau == 0:
            return mpmath.mpf(0), u
        if isinstance(self.model, WishartParams):
            a = self.eye + u * self.g
            det = mpmath.det(a)
            if det <= 0:
                return None
            phi = self.kappa / 2 * mpmath.log(det)
            psi = self.left * mpmath.inverse(a) * u * self.right
            return phi, (psi + psi.T) / 2
        e = self.flow_tau
        psi = e.T * u * e
        integral = mpmath.mpf(0)
        for em, w in zip(self.nodes, self.weights):
            ws = em.T * u * em
            a = self.eye + 2 * ws * self.calq
            det = mpmath.det(a)
            if det <= 0:
                return None
            log_l = -self.n / 2 * mpmath.log(det)
            if self.theta is not None:
                inner = mpmath.inverse(self.eye + 2 * self.calq * ws) * self.calq
                prod = self.theta_qinv * inner
                log_l += -self.tr_theta / 2 + sum(prod[i, i] for i in range(self.d)) / 2
            integral += w * mpmath.exp(log_l)
        phi = self.lam * self.tau - self.lam * integral
        return phi, (psi + psi.T) / 2

    def log_laplace(self, u: mpmath.matrix, sigma: mpmath.matrix | None = None):
        """``-phi - tr[psi sigma]`` or ``None`` outside the transform domain."""
        out = self.coeffs(u)
        if out is None:
            return None
        phi, psi = out
        sigma = self.sigma0 if sigma is None else sigma
        return -phi - sum((psi * sigma)[i, i] for i in range(self.d))


def _mp_leggauss(n: int):
    """Gauss-Legendre nodes/weights at the current mpmath precision (Newton on P_n)."""
    xs, ws = [], []
    for i in range(1, n + 1):
        x = mpmath.cos(mpmath.pi * (i - mpmath.mpf(1) / 4) / (n + mpmath.mpf(1) / 2))
        for _ in range(100):
            p0, p1 = mpmath.mpf(1), x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1)
            dx = p1 / dp
            x -= dx
            if abs(dx) < mpmath.mpf(10) ** (-mpmath.mp.dps - 5):
                break
        p0, p1 = mpmath.mpf(1), x
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1)
        xs.append(x)
        ws.append(2 / ((1 - x * x) * dp * dp))
    return xs, ws
