"""Monte Carlo under the terminal measure: independent check of every analytic price.

Paths are generated in fixed-size chunks, each with its own Philox stream
spawned from the configured seed, and statistics are merged chunk by chunk in
order. Estimates therefore depend on the seed and the chunk size only, not on
the number of worker threads.

Wishart paths with integer ``kappa`` use ``S = X^T X`` where the rows of the
``kappa x d`` matrix ``X`` are independent Ornstein-Uhlenbeck processes
``dx = M x dt + Q^T dw``, stepped with their exact Gaussian transition.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import wishart

from . import matcore
from .affine import JumpOUParams, Model, NonCentralWishartJumps, WishartJumps, WishartParams
from .caps import CapletSpec, CapSpec, FloorletSpec
from .errors import ConfigError, UnsupportedLaw
from .libor import MartingaleFamily, log_martingale
from .swaptions import SwaptionSpec

SCHEMES = ("exact_squared_ou", "euler_projected")


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 200_000
    dt: float = 1.0 / 96.0
    seed: int = 20240607
    scheme: str = "exact_squared_ou"
    antithetic: bool = False
    chunk_size: int = 25_000
    workers: int | None = None

    def __post_init__(self):
        if int(self.n_paths) < 1000:
            raise ConfigError("n_paths must be at least 1000", "n_paths")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", "dt")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}", "scheme")
        if int(self.chunk_size) < 2 or (self.antithetic and self.chunk_size % 2):
            raise ConfigError("chunk_size must be at least 2 (and even with antithetic pairs)", "chunk_size")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "seed")

    def check_step(self, delta_t: float):
        if self.dt > delta_t / 8 + 1e-15:
            raise ConfigError(f"dt={self.dt} exceeds delta_t/8={delta_t / 8}", "dt")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int

    def z_score(self, value: float) -> float:
        if self.std_error == 0:
            return 0.0 if value == self.mean else math.inf
        return (value - self.mean) / self.std_error

    def within(self, value: float, n_se: float = 3.0) -> bool:
        return abs(self.z_score(value)) <= n_se


@dataclass
class PathSet:
    """States ``(n_paths, n_times, d, d)`` at ``times``."""

    times: np.ndarray
    states: np.ndarray
    seed: int
    scheme: str
    biased: bool = False
    jump_counts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------- time grids and streams


def _grid(times: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Step grid from 0 containing every observation time; returns (grid, obs positions)."""
    grid = [0.0]
    obs = []
    for t in times:
        start = grid[-1]
        if t < start - 1e-14:
            raise ValueError("observation times must be nondecreasing and nonnegative")
        n = max(int(math.ceil((t - start) / dt - 1e-9)), 0)
        grid.extend(start + (t - start) * np.arange(1, n + 1) / n)
        if n:
            grid[-1] = float(t)
        obs.append(len(grid) - 1)
    return np.asarray(grid), np.asarray(obs)


def _chunk_sizes(cfg: McConfig) -> list[int]:
    n, c = int(cfg.n_paths), int(cfg.chunk_size)
    sizes = [c] * (n // c)
    if n % c:
        rest = n % c
        sizes.append(rest + (rest % 2 if cfg.antithetic else 0))
    return sizes


def _streams(cfg: McConfig, n_chunks: int) -> list[np.random.Generator]:
    seqs = np.random.SeedSequence(int(cfg.seed)).spawn(n_chunks)
    return [np.random.Generator(np.random.Philox(s)) for s in seqs]


def _normals(rng: np.random.Generator, shape, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(shape)
    half = rng.standard_normal((shape[0] // 2,) + tuple(shape[1:]))
    return np.concatenate([half, -half])


# ---------------------------------------------------------------- Wishart paths


def _psd_sqrt(v: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(matcore.sym(v))
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


class _WishartStepper:
    def __init__(self, params: WishartParams, grid: np.ndarray, scheme: str):
        self.params = params
        self.scheme = scheme
        self.steps = np.diff(grid)
        d = params.dim
        if scheme == "exact_squared_ou":
            kappa = params.kappa
            if abs(kappa - round(kappa)) > 1e-12:
                raise ConfigError("exact scheme needs an integer kappa; use euler_projected", "scheme")
            self.rows = int(round(kappa))
            self.trans = {}
            for h in np.unique(np.round(self.steps, 14)):
                _, g, _ = params.propagator(float(h))
                self.trans[h] = (matcore.expm(float(h) * params.m).T, _psd_sqrt(0.5 * g).T)
            x0 = np.zeros((self.rows, d))
            x0[:d] = matcore.sqrtm_spd(params.sigma0)
            self.x0 = x0

    def run(self, n: int, rng: np.random.Generator, obs: np.ndarray, antithetic: bool) -> np.ndarray:
        p = self.params
        d = p.dim
        out = np.empty((n, len(obs), d, d))
        want = {int(j): idx for idx, j in enumerate(obs)}
        if self.scheme == "exact_squared_ou":
            x = np.broadcast_to(self.x0, (n, self.rows, d)).copy()
            if 0 in want:
                out[:, want[0]] = np.swapaxes(x, 1, 2) @ x
            for j, h in enumerate(self.steps, start=1):
                flow, chol = self.trans[np.round(h, 14)]
                x = x @ flow + _normals(rng, (n, self.rows, d), antithetic) @ chol
                if j in want:
                    out[:, want[j]] = np.swapaxes(x, 1, 2) @ x
            return out
        s = np.broadcast_to(p.sigma0, (n, d, d)).copy()
        drift0 = p.kappa * p.qtq
        if 0 in want:
            out[:, want[0]] = s
        for j, h in enumerate(self.steps, start=1):
            w, v = np.linalg.eigh(s)
            root = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ np.swapaxes(v, 1, 2)
            dw = math.sqrt(h) * _normals(rng, (n, d, d), antithetic)
            noise = root @ dw @ p.q
            s = s + (drift0 + p.m @ s + s @ p.m.T) * h + noise + np.swapaxes(noise, 1, 2)
            w, v = np.linalg.eigh(0.5 * (s + np.swapaxes(s, 1, 2)))
            s = (v * np.clip(w, 0.0, None)[:, None, :]) @ np.swapaxes(v, 1, 2)
            if j in want:
                out[:, want[j]] = s
        return out


# ---------------------------------------------------------------- jump OU paths


def _jump_sizes(law, count: int, rng: np.random.Generator) -> np.ndarray:
    d = law.calq.shape[0]
    if count == 0:
        return np.zeros((0, d, d))
    if isinstance(law, WishartJumps):
        draws = wishart(df=law.n, scale=law.calq).rvs(size=count, random_state=rng)
        return np.asarray(draws).reshape(count, d, d)
    if isinstance(law, NonCentralWishartJumps):
        p = law.calm.shape[1]
        rest = law.n - p
        if rest != 0 and rest <= d - 1:
            raise UnsupportedLaw("non-central sampler needs n - p = 0 or n - p > d - 1")
        chol = np.linalg.cholesky(law.calq)
        z = rng.standard_normal((count, p, d)) @ chol.T + law.calm.T[None]
        out = np.swapaxes(z, 1, 2) @ z
        if rest > 0:
            out += np.asarray(wishart(df=rest, scale=law.calq).rvs(size=count, random_state=rng)).reshape(count, d, d)
        return out
    raise UnsupportedLaw(f"no sampler for jump law {type(law).__name__}")


def _jump_chunk(params: JumpOUParams, times: np.ndarray, n: int, rng: np.random.Generator):
    d = params.dim
    horizon = float(times[-1]) if len(times) else 0.0
    counts = rng.poisson(params.lam * horizon, size=n)
    total = int(counts.sum())
    owner = np.repeat(np.arange(n), counts)
    at = rng.uniform(0.0, horizon, size=total)
    sizes = _jump_sizes(params.jump_law, total, rng)
    # S_t = e^{Mt} (S_0 + sum_{s_j <= t} e^{-M s_j} J_j e^{-M^T s_j}) e^{M^T t}
    back = scipy.linalg.expm(-at[:, None, None] * params.m) if total else np.zeros((0, d, d))
    pulled = back @ sizes @ np.swapaxes(back, 1, 2)
    out = np.empty((n, len(times), d, d))
    for idx, t in enumerate(times):
        acc = np.broadcast_to(params.sigma0, (n, d, d)).copy()
        hit = at <= t
        np.add.at(acc, owner[hit], pulled[hit])
        e = params.flow(float(t))
        out[:, idx] = e @ acc @ e.T
    return out, counts


# ---------------------------------------------------------------- public simulation


def _simulate_chunk(model: Model, times, cfg: McConfig, size: int, rng, stepper=None, obs=None):
    if isinstance(model, WishartParams):
        return stepper.run(size, rng, obs, cfg.antithetic), None
    if isinstance(model, JumpOUParams):
        return _jump_chunk(model, times, size, rng)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _prepare(model: Model, times: np.ndarray, cfg: McConfig):
    if isinstance(model, WishartParams):
        grid, obs = _grid(times, cfg.dt)
        return _WishartStepper(model, grid, cfg.scheme), obs
    return None, None


def simulate_wishart(params: WishartParams, horizon: float, cfg: McConfig, times: Sequence[float] | None = None) -> PathSet:
    """Paths of the Wishart process under the terminal measure at ``times`` (default: the step grid)."""
    if times is None:
        times, _ = _grid(np.array([horizon]), cfg.dt)
    return _simulate(params, np.asarray(times, dtype=float), cfg)


def simulate_jump_ou(params: JumpOUParams, horizon: float, cfg: McConfig, times: Sequence[float] | None = None) -> PathSet:
    """Exact paths of the jump OU process at ``times`` (default: the step grid)."""
    if times is None:
        times, _ = _grid(np.array([horizon]), cfg.dt)
    return _simulate(params, np.asarray(times, dtype=float), cfg)


def _simulate(model: Model, times: np.ndarray, cfg: McConfig) -> PathSet:
    stepper, obs = _prepare(model, times, cfg)
    sizes = _chunk_sizes(cfg)
    states, counts = [], []
    for size, rng in zip(sizes, _streams(cfg, len(sizes))):
        s, c = _simulate_chunk(model, times, cfg, size, rng, stepper, obs)
        states.append(s)
        if c is not None:
            counts.append(c)
    biased = isinstance(model, WishartParams) and cfg.scheme == "euler_projected"
    return PathSet(times, np.concatenate(states)[: cfg.n_paths], int(cfg.seed), cfg.scheme, biased,
                   np.concatenate(counts)[: cfg.n_paths] if counts else None)


def iter_chunks(model: Model, times: Sequence[float], cfg: McConfig):
    """Yield state chunks ``(n, len(times), d, d)`` in a fixed, seed-determined order."""
    times = np.asarray(times, dtype=float)
    stepper, obs = _prepare(model, times, cfg)
    sizes = _chunk_sizes(cfg)
    for size, rng in zip(sizes, _streams(cfg, len(sizes))):
        yield _simulate_chunk(model, times, cfg, size, rng, stepper, obs)[0]


def _worker_count(cfg: McConfig) -> int:
    if cfg.workers is not None:
        return max(int(cfg.workers), 1)
    return max(int(os.environ.get("WISHART_LIBOR_THREADS", "1")), 1)


def mc_expectation(model: Model, times: Sequence[float], functional: Callable[[np.ndarray], np.ndarray],
                   cfg: McConfig) -> list[McEstimate]:
    """Estimate ``E[functional(S_times)]`` for a vector-valued functional of the path.

    ``functional`` maps states ``(n, len(times), d, d)`` to samples ``(n, p)``.
    With antithetic variates the two halves of a chunk are averaged pairwise
    before the standard error is formed.
    """
    times = np.asarray(times, dtype=float)
    stepper, obs = _prepare(model, times, cfg)
    sizes = _chunk_sizes(cfg)
    streams = _streams(cfg, len(sizes))

    def one(job):
        size, rng = job
        states = _simulate_chunk(model, times, cfg, size, rng, stepper, obs)[0]
        x = np.asarray(functional(states), dtype=float).reshape(size, -1)
        if cfg.antithetic:
            x = 0.5 * (x[: size // 2] + x[size // 2:])
        mean = x.mean(axis=0)
        return x.shape[0], mean, ((x - mean) ** 2).sum(axis=0)

    jobs = list(zip(sizes, streams))
    workers = _worker_count(cfg)
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:  # Chan et al. pairwise merge, in chunk order
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta ** 2 * n * nb / tot
        n = tot
    var = m2 / max(n - 1, 1)
    n_paths = n * (2 if cfg.antithetic else 1)
    return [McEstimate(float(mu), float(math.sqrt(v / n)), n_paths) for mu, v in zip(np.atleast_1d(mean), np.atleast_1d(var))]


# ---------------------------------------------------------------- instruments


def martingales_at(model: Model, family: MartingaleFamily, t: float, states: np.ndarray, ks) -> np.ndarray:
    """``M^{u_k}_t`` for each ``k`` in ``ks`` over a batch of states ``(n, d, d)``; returns ``(n, len(ks))``."""
    ks = np.asarray(ks)
    out = np.ones((states.shape[0], ks.size))
    live = ks < family.n_tenors
    if np.any(live):
        out[:, live] = np.exp(log_martingale(model, family, t, ks[live], states))
    return out


def caplet_payoffs(model: Model, family: MartingaleFamily, k: int, strikes, states: np.ndarray, floor: bool = False):
    """Terminal-measure payoff ``(M^{u_k} - K' M^{u_{k+1}})^+`` at ``T_k`` per strike, ``(n, n_strikes)``."""
    t = family.curve.maturity(k)
    mk = martingales_at(model, family, t, states, [k, k + 1])
    kk = 1.0 + family.delta_t * np.asarray(strikes, dtype=float)
    diff = mk[:, :1] - kk[None, :] * mk[:, 1:2]
    return np.maximum(-diff if floor else diff, 0.0)


def swaption_payoffs(model: Model, family: MartingaleFamily, spec: SwaptionSpec, states: np.ndarray) -> np.ndarray:
    """Terminal-measure payoff of the swaption at ``T_i``: ``(sum c_j M^{u_j} - M^{u_i})^{+/-}``."""
    t = family.curve.maturity(spec.i)
    coupons = spec.coupons(family.delta_t)
    ks = [spec.i] + sorted(coupons)
    mk = martingales_at(model, family, t, states, ks)
    cb = mk[:, 1:] @ np.array([coupons[k] for k in ks[1:]])
    diff = cb - mk[:, 0]
    return np.maximum(diff if spec.side == "receiver" else -diff, 0.0)


def mc_caplets(model: Model, family: MartingaleFamily, k: int, strikes, cfg: McConfig,
               floor: bool = False) -> list[McEstimate]:
    """Caplet (or floorlet) prices for several strikes from one set of paths."""
    cfg.check_step(family.delta_t)
    t = family.curve.maturity(k)
    disc = family.curve.terminal_bond
    est = mc_expectation(model, [t], lambda s: caplet_payoffs(model, family, k, strikes, s[:, 0], floor), cfg)
    return [McEstimate(disc * e.mean, disc * e.std_error, e.n_paths) for e in est]


def mc_price(instrument, model: Model, family: MartingaleFamily, cfg: McConfig) -> McEstimate:
    """Price a caplet, floorlet, cap/floor or swaption by simulation under the terminal measure."""
    cfg.check_step(family.delta_t)
    disc = family.curve.terminal_bond
    if isinstance(instrument, CapletSpec):
        floor = isinstance(instrument, FloorletSpec)
        est = mc_caplets(model, family, instrument.k, [instrument.strike], cfg, floor)[0]
        return McEstimate(instrument.notional * est.mean, instrument.notional * est.std_error, est.n_paths)
    if isinstance(instrument, CapSpec):
        ks = list(range(instrument.k_first, instrument.k_last + 1))
        times = [family.curve.maturity(k) for k in ks]

        def payoff(s):
            legs = [caplet_payoffs(model, family, k, [instrument.strike], s[:, j], instrument.floor)[:, 0]
                    for j, k in enumerate(ks)]
            return np.sum(legs, axis=0)

        est = mc_expectation(model, times, payoff, cfg)[0]
        scale = disc * instrument.notional
        return McEstimate(scale * est.mean, scale * est.std_error, est.n_paths)
    if isinstance(instrument, SwaptionSpec):
        instrument.check(family)
        t = family.curve.maturity(instrument.i)
        est = mc_expectation(model, [t], lambda s: swaption_payoffs(model, family, instrument, s[:, 0]), cfg)[0]
        scale = disc * instrument.notional
        return McEstimate(scale * est.mean, scale * est.std_error, est.n_paths)
    raise TypeError(f"unsupported instrument {type(instrument).__name__}")


def mc_coupon_bond_moments(model: Model, family: MartingaleFamily, spec: SwaptionSpec, qs: Sequence[int],
                           measure_k: int, cfg: McConfig) -> list[McEstimate]:
    """``E^{P_{T_k}}[CB(T_i)^q]`` by reweighting terminal-measure paths with ``M^{u_k}_{T_i}/M^{u_k}_0``."""
    spec.check(family)
    t = family.curve.maturity(spec.i)
    coupons = spec.coupons(family.delta_t)
    ks = [spec.i] + sorted(coupons)
    m0 = martingales_at(model, family, 0.0, model.sigma0[None], [measure_k])[0, 0]

    def functional(s):
        mk = martingales_at(model, family, t, s[:, 0], ks + [measure_k])
        cb = mk[:, 1:-1] @ np.array([coupons[k] for k in ks[1:]]) / mk[:, 0]
        weight = mk[:, -1] / m0
        return np.stack([weight * cb ** q for q in qs], axis=1)

    return mc_expectation(model, [t], functional, cfg)


def mc_laplace(model: Model, t: float, us, cfg: McConfig) -> list[McEstimate]:
    """``E[exp(-tr[u S_t])]`` for each ``u`` in ``us``."""
    us = np.asarray(us, dtype=float)
    return mc_expectation(model, [t], lambda s: np.exp(-np.einsum("kij,nji->nk", us, s[:, 0])), cfg)


def dump_paths(paths: PathSet, path: str | os.PathLike):
    """Write ``path_id, t, vech(S)...`` rows (upper triangle, row-major) to CSV."""
    d = paths.states.shape[-1]
    iu = np.triu_indices(d)
    header = ["path_id", "t"] + [f"s{i + 1}{j + 1}" for i, j in zip(*iu)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version=1 seed={paths.seed} scheme={paths.scheme} biased={str(paths.biased).lower()}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for pid in range(paths.states.shape[0]):
            for tj, t in enumerate(paths.times):
                w.writerow([pid, repr(float(t))] + [repr(float(x)) for x in matcore.vech(paths.states[pid, tj])])
