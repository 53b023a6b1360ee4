"""Black-76 implied volatilities, caplet/swaption surfaces and the skew diagnostic."""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from . import matcore
from .affine import Model, WishartParams
from .caps import FourierConfig, price_caplets
from .errors import InvalidParameters, NoConvergence, OutOfBand, ZeroVol
from .libor import MartingaleFamily, forward_coeffs
from .swaptions import MAX_ORDER, SwaptionSpec, annuity, forward_swap_rate, price_swaption

SCHEMA_VERSION = 1
VOL_BOUNDS = (1e-6, 5.0)


# ---------------------------------------------------------------- Black-76


def black76(forward: float, strike: float, expiry: float, vol: float, discount: float = 1.0, call: bool = True) -> float:
    """Undiscounted-forward Black-76 price times ``discount``."""
    if expiry <= 0 or vol <= 0:
        intrinsic = forward - strike if call else strike - forward
        return discount * max(intrinsic, 0.0)
    sd = vol * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    if call:
        return discount * (forward * ndtr(d1) - strike * ndtr(d2))
    return discount * (strike * ndtr(-d2) - forward * ndtr(-d1))


def black_implied_vol(price: float, forward: float, strike: float, expiry: float, discount: float = 1.0,
                      call: bool = True, max_iter: int = 200) -> float:
    """Black-76 volatility reproducing ``price`` (Brent on ``[1e-6, 5]``).

    A price at the intrinsic lower bound returns ``0.0``; prices outside the
    no-arbitrage band raise ``OutOfBand``.
    """
    if forward <= 0 or strike <= 0 or expiry <= 0 or discount <= 0:
        raise ValueError("forward, strike, expiry and discount must be positive")
    lower = discount * max(forward - strike if call else strike - forward, 0.0)
    upper = discount * (forward if call else strike)
    tol = 1e-14 * max(upper, 1e-300)
    if price < lower - tol or price >= upper:
        raise OutOfBand(f"price {price:.6g} outside [{lower:.6g}, {upper:.6g})")
    if price <= lower + tol:
        return 0.0

    def f(v):
        return black76(forward, strike, expiry, v, discount, call) - price

    lo, hi = VOL_BOUNDS
    if f(lo) > 0:
        return 0.0
    if f(hi) < 0:
        raise OutOfBand(f"price {price:.6g} needs a volatility above {hi}")
    try:
        vol, info = brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=max_iter, full_output=True)
    except RuntimeError as exc:
        raise NoConvergence(str(exc)) from exc
    if not info.converged:
        raise NoConvergence(f"Brent did not converge in {max_iter} iterations")
    return float(vol)


# ---------------------------------------------------------------- skew


def skew_from_matrices(b, q, sigma) -> float:
    """Correlation between a forward rate and its variance for loading ``b``, vol ``q``, state ``sigma``."""
    b = matcore.sym(b)
    q = np.asarray(q, dtype=float)
    sigma = matcore.sym(sigma)
    qtq = q.T @ q
    bq = b @ qtq
    num = np.trace(bq @ bq @ b @ sigma)
    var_rate = np.trace(q @ b @ sigma @ b @ q.T)
    var_vol = np.trace(sigma @ bq @ bq @ bq @ b)
    if var_rate <= 0 or var_vol <= 0:
        raise ZeroVol("forward loading has no volatility")
    return float(num / (math.sqrt(var_rate) * math.sqrt(var_vol)))


def skew_correlation(model: WishartParams, family: MartingaleFamily, k: int, sigma, t: float = 0.0) -> float:
    """Skew of the forward rate ``L(t, T_k)`` with frozen coefficients, in ``[0, 1]``."""
    if not isinstance(model, WishartParams):
        raise TypeError("skew is defined for the Wishart diffusion only")
    if not matcore.is_spd(sigma):
        raise ValueError("sigma must be positive definite")
    fc = forward_coeffs(model, family, k, t)
    return skew_from_matrices(fc.b, model.q, sigma)


def correlated_q(q11: float, q22: float, rho: float) -> np.ndarray:
    """``Q`` with off-diagonal ``rho sqrt(q11 q22)``; invertible for ``|rho| < 1``."""
    if not abs(rho) < 1:
        raise InvalidParameters("|rho| must be below 1")
    if q11 <= 0 or q22 <= 0:
        raise InvalidParameters("diagonal entries must be positive")
    off = rho * math.sqrt(q11 * q22)
    return np.array([[q11, off], [off, q22]])


# ---------------------------------------------------------------- surfaces


def model_fingerprint(model: Model) -> str:
    h = hashlib.sha256()
    h.update(type(model).__name__.encode())
    if isinstance(model, WishartParams):
        parts = [model.sigma0, model.m, model.q, np.array([model.kappa])]
    else:
        law = model.jump_law
        parts = [model.sigma0, model.m, np.array([model.lam, law.n]), law.calq]
        if hasattr(law, "calm"):
            parts.append(law.calm)
    for a in parts:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


@dataclass
class SurfaceGrid:
    """Prices and implied vols on rows ``maturities`` (tenor indices) and columns ``strikes``.

    For swaption surfaces the columns are swap lengths in accrual periods.
    ``implied_vols`` is ``nan`` where the inversion failed.
    """

    strikes: np.ndarray
    maturities: np.ndarray
    prices: np.ndarray
    implied_vols: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)
        self.maturities = np.asarray(self.maturities, dtype=int)
        self.prices = np.asarray(self.prices, dtype=float)
        self.implied_vols = np.asarray(self.implied_vols, dtype=float)
        shape = (self.maturities.size, self.strikes.size)
        if self.prices.shape != shape or self.implied_vols.shape != shape:
            raise ValueError(f"price and vol matrices must have shape {shape}")
        if np.any(np.diff(self.strikes) <= 0) or np.any(np.diff(self.maturities) <= 0):
            raise ValueError("strikes and maturities must be strictly increasing")

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if not math.isfinite(x) else float(x) for x in row] for row in a]

        return {
            "schema_version": SCHEMA_VERSION,
            "strikes": [float(x) for x in self.strikes],
            "maturities": [int(x) for x in self.maturities],
            "prices": clean(self.prices),
            "implied_vols": clean(self.implied_vols),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceGrid":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")

        def dirty(a):
            return np.array([[np.nan if x is None else x for x in row] for row in a], dtype=float)

        strikes = data["strikes"]
        mats = data["maturities"]
        prices = dirty(data["prices"]).reshape(len(mats), len(strikes))
        vols = dirty(data["implied_vols"]).reshape(len(mats), len(strikes))
        return cls(strikes, mats, prices, vols, dict(data.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self, which: str = "implied_vols") -> str:
        """Matrix ``which`` with the strikes as header row and maturities as first column."""
        table = getattr(self, which)
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION} table={which} kind={self.metadata.get('kind', '')}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["maturity"] + [repr(float(x)) for x in self.strikes])
        for mat, row in zip(self.maturities, table):
            w.writerow([int(mat)] + ["" if not math.isfinite(x) else repr(float(x)) for x in row])
        return buf.getvalue()

    def column(self, strike: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.strikes - strike)))
        return self.implied_vols[:, j]


def _thread_count() -> int:
    return max(int(os.environ.get("WISHART_LIBOR_THREADS", "1")), 1)


def _parallel_map(fn, items):
    items = list(items)
    n = _thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def _caplet_vols(family: MartingaleFamily, k: int, strikes: np.ndarray, prices: np.ndarray) -> np.ndarray:
    curve = family.curve
    fwd = curve.forward_libor(k)
    df = curve.bond(k + 1)
    out = np.full(strikes.shape, np.nan)
    for j, (kk, pr) in enumerate(zip(strikes, prices)):
        if kk <= 0:
            continue
        try:
            out[j] = black_implied_vol(pr / curve.delta_t, fwd, kk, curve.maturity(k), df)
        except (OutOfBand, NoConvergence, ValueError):
            pass
    return out


def build_caplet_surface(model: Model, family: MartingaleFamily, strikes, tenor_indices,
                         cfg: FourierConfig | None = None) -> SurfaceGrid:
    """Caplet prices and Black vols for every ``(k, strike)`` cell."""
    cfg = cfg or FourierConfig()
    strikes = np.asarray(strikes, dtype=float)
    ks = [int(k) for k in tenor_indices]

    def row(k):
        prices = price_caplets(model, family, k, strikes, cfg)
        return prices, _caplet_vols(family, k, strikes, prices)

    rows = _parallel_map(row, ks)
    prices = np.array([r[0] for r in rows])
    vols = np.array([r[1] for r in rows])
    meta = {"kind": "caplet", "model": model_fingerprint(model), "alpha": cfg.alpha,
            "n_nodes": cfg.n_nodes, "v_max": cfg.v_max, "delta_t": family.delta_t}
    return SurfaceGrid(strikes, ks, prices, vols, meta)


def atm_term_structure(model: Model, family: MartingaleFamily, tenor_indices,
                       cfg: FourierConfig | None = None) -> list[tuple[float, float]]:
    """``(T_k, vol)`` for ATM caplets, ATM meaning strike equal to the forward Libor."""
    cfg = cfg or FourierConfig()
    curve = family.curve

    def one(k):
        fwd = curve.forward_libor(k)
        price = price_caplets(model, family, k, [fwd], cfg)
        return curve.maturity(k), float(_caplet_vols(family, k, np.array([fwd]), price)[0])

    return _parallel_map(one, [int(k) for k in tenor_indices])


def atm_swaption_surface(model: Model, family: MartingaleFamily, expiries, swap_lengths,
                         order: int = MAX_ORDER) -> SurfaceGrid:
    """ATM receiver swaption prices and Black vols; rows are expiries, columns swap lengths (periods).

    Cells whose swap runs past the last tenor are left as ``nan``.
    """
    curve = family.curve
    expiries = [int(i) for i in expiries]
    lengths = [int(n) for n in swap_lengths]
    cells = [(i, n) for i in expiries for n in lengths if i + n <= family.n_tenors]

    def one(cell):
        i, n = cell
        rate = forward_swap_rate(curve, i, i + n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            price = price_swaption(model, family, SwaptionSpec(i, i + n, rate), order)
        try:
            vol = black_implied_vol(price, rate, rate, curve.maturity(i), annuity(curve, i, i + n), call=False)
        except (OutOfBand, NoConvergence):
            vol = float("nan")
        return price, vol

    results = dict(zip(cells, _parallel_map(one, cells)))
    prices = np.full((len(expiries), len(lengths)), np.nan)
    vols = np.full_like(prices, np.nan)
    for (i, n), (pr, vol) in results.items():
        prices[expiries.index(i), lengths.index(n)] = pr
        vols[expiries.index(i), lengths.index(n)] = vol
    meta = {"kind": "swaption_atm", "model": model_fingerprint(model), "order": order, "delta_t": family.delta_t}
    return SurfaceGrid(np.asarray(lengths, dtype=float), expiries, prices, vols, meta)


__all__ = [
    "black76", "black_implied_vol", "skew_from_matrices", "skew_correlation", "correlated_q",
    "SurfaceGrid", "build_caplet_surface", "atm_term_structure", "atm_swaption_surface", "model_fingerprint",
]
