"""Small dense matrix helpers shared by the analytic modules.

Matrices are plain ``numpy`` arrays. Symmetric inputs are symmetrized on the
way in (``sym``) so repeated products cannot drift away from symmetry. Most
helpers accept a leading batch shape ``(..., d, d)``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .errors import NotSPD, Singular, Unstable

_LOG_TINY = math.log(1e-300)


def sym(a) -> np.ndarray:
    """Return ``(a + a^T) / 2`` over the last two axes, checking finiteness."""
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if not np.iscomplexobj(a):
        a = a.astype(float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def tr(a, b) -> np.ndarray:
    """Batched ``tr[a b]`` without forming the product."""
    return np.einsum("...ij,...ji->...", a, b)


def is_spd(a, tol: float = 0.0) -> bool:
    a = sym(a)
    return bool(np.linalg.eigvalsh(a)[0] > tol)


def expm(a) -> np.ndarray:
    """Matrix exponential (Pade-13 with scaling and squaring)."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(a)
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential is not representable")
    return out


def sqrtm_spd(a) -> np.ndarray:
    a = sym(a)
    w, v = np.linalg.eigh(a)
    if w[0] <= 0:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return sym((v * np.sqrt(w)) @ v.T)


def solve_lyapunov(m, c) -> np.ndarray:
    """Solve ``m X + X m^T + c = 0`` for symmetric ``X`` via the Kronecker system."""
    m = square(m)
    c = sym(c)
    if np.max(np.linalg.eigvals(m).real) >= 0:
        raise Unstable("mean reversion matrix must have eigenvalues with negative real part")
    d = m.shape[0]
    eye = np.eye(d)
    # row-major vec: vec(mX) = (m kron I) vec(X), vec(X m^T) = (I kron m) vec(X)
    k = np.kron(m, eye) + np.kron(eye, m)
    x = np.linalg.solve(k, -c.reshape(-1)).reshape(d, d)
    return sym(x)


def logdet_tracked(a, prev_phase: float = 0.0) -> tuple[complex, float]:
    """Log-determinant of a complex matrix with its phase unwrapped near ``prev_phase``.

    Returns ``(log det a, phase)`` where ``phase`` is the imaginary part, to be
    passed back in as ``prev_phase`` at the next point of a path.
    """
    a = np.asarray(a, dtype=complex)
    sign, logabs = np.linalg.slogdet(a)
    if sign == 0 or logabs < _LOG_TINY:
        raise Singular("determinant vanishes")
    phase = float(np.angle(sign))
    phase += 2.0 * math.pi * round((prev_phase - phase) / (2.0 * math.pi))
    return complex(logabs, phase), phase


def log1p_eig_sum(a) -> tuple[np.ndarray, np.ndarray]:
    """``log det(I + a)`` continued analytically along ``t -> I + t a``, ``t`` in [0, 1].

    Each factor ``1 + t mu`` of the determinant moves on a straight segment from 1,
    so the principal logarithm of every factor is already the continuous branch.
    The second output flags batch entries where the segment hits a zero of the
    determinant (an eigenvalue real and <= -1).
    """
    mu = np.linalg.eigvals(a)
    one = 1.0 + mu
    scale = np.maximum(np.abs(mu), 1.0)
    on_cut = (np.abs(one.imag) <= 1e-13 * scale) & (one.real <= 1e-13 * scale)
    bad = np.any(on_cut | (np.abs(one) < 1e-300), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(np.log(one.astype(complex)), axis=-1)
    return out, bad


def vech(a) -> np.ndarray:
    """Stack the upper triangle (row-major, including the diagonal) along the last axis."""
    a = np.asarray(a)
    d = a.shape[-1]
    iu = np.triu_indices(d)
    return a[..., iu[0], iu[1]]


def ivech(v, d: int) -> np.ndarray:
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (d, d), dtype=v.dtype)
    iu = np.triu_indices(d)
    out[..., iu[0], iu[1]] = v
    out[..., iu[1], iu[0]] = v
    return out
