"""Acceptance suite: numerical self-checks of the whole engine against independent routes.

Each criterion returns a :class:`CriterionResult` holding named sub-checks. The
``full`` suite runs at the published scale; ``quick`` shrinks path counts and
random-case counts by roughly a factor of ten for smoke testing.
"""

from __future__ import annotations

import dataclasses
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .affine import (
    JumpOUParams,
    WishartJumps,
    WishartParams,
    _riccati_rk4,
    coeffs,
    laplace,
    wishart_psi_phi,
)
from .analytics import black_implied_vol, skew_from_matrices
from .caps import FourierConfig, price_caplets, price_floorlets
from .errors import OutOfBand
from .libor import MartingaleFamily, TenorCurve, fit_term_structure, log_martingale
from .oracle import McConfig, McEstimate, iter_chunks, mc_caplets, mc_coupon_bond_moments, mc_laplace, mc_price
from .swaptions import SwaptionSpec, _MomentEngine, forward_swap_rate, swaption_breakdown


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bad = [c.name for c in self.checks if not c.passed]
        tail = f" failing: {', '.join(bad)}" if bad else ""
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s){tail}"


@dataclass(frozen=True)
class Scale:
    """Sizes that differ between the quick and full suites."""

    rk4_cases: int = 50
    flow_cases: int = 100
    martingale_paths: int = 200_000
    caplet_paths: int = 200_000
    swaption_paths: int = 500_000
    moment_paths: int = 200_000
    laplace_paths: int = 200_000
    skew_cases: int = 1000
    smile_points: int = 9


SUITES = {
    "full": Scale(),
    "quick": Scale(rk4_cases=10, flow_cases=20, martingale_paths=20_000, caplet_paths=40_000,
                   swaption_paths=50_000, moment_paths=40_000, laplace_paths=40_000, skew_cases=200,
                   smile_points=5),
}


def benchmark_wishart() -> WishartParams:
    return WishartParams(np.diag([3.75, 3.45]), np.diag([-0.0003125, -0.0005]), np.diag([0.034, 0.042]), 3.0)


def benchmark_curve() -> TenorCurve:
    return TenorCurve.flat(1.0 / 3.0, 12, 0.05)


def benchmark_jump_ou() -> JumpOUParams:
    return JumpOUParams(np.array([[1.875, 0.6], [0.6, 1.275]]), np.diag([-0.055, -0.176]), 0.1,
                        WishartJumps(3.1, np.diag([0.27, 0.05])))


@dataclass
class Context:
    """Models and settings the criteria run against."""

    model: WishartParams = field(default_factory=benchmark_wishart)
    curve: TenorCurve = field(default_factory=benchmark_curve)
    jump_model: JumpOUParams = field(default_factory=benchmark_jump_ou)
    mc: McConfig = field(default_factory=lambda: McConfig(dt=1.0 / 24.0))
    fourier: FourierConfig = field(default_factory=FourierConfig)
    order: int = 7
    _family: MartingaleFamily | None = field(default=None, repr=False)

    @property
    def family(self) -> MartingaleFamily:
        if self._family is None:
            self._family = fit_term_structure(self.model, self.curve)
        return self._family

    def paths(self, n: int) -> McConfig:
        return dataclasses.replace(self.mc, n_paths=n)

    @classmethod
    def from_config(cls, cfg) -> "Context":
        """Use a loaded model config; a pure-jump config replaces only the jump model."""
        ctx = cls(curve=cfg.curve, mc=cfg.mc, fourier=cfg.fourier, order=cfg.order)
        if isinstance(cfg.model, WishartParams):
            ctx.model = cfg.model
        else:
            ctx.jump_model = cfg.model
        return ctx


def _rng(tag: int) -> np.random.Generator:
    return np.random.default_rng([20240607, tag])


def _random_spd(rng, d=2, lo=0.1, hi=2.0) -> np.ndarray:
    a = rng.normal(size=(d, d))
    w, v = np.linalg.eigh(a @ a.T)
    return v @ np.diag(rng.uniform(lo, hi, d)) @ v.T


def _random_wishart(rng) -> WishartParams:
    m = -_random_spd(rng, lo=0.05, hi=1.0) + 0.1 * rng.normal() * np.array([[0.0, 1.0], [-1.0, 0.0]])
    q = rng.normal(scale=0.4, size=(2, 2)) + 0.3 * np.eye(2)
    return WishartParams(_random_spd(rng), m, q, rng.uniform(3.0, 6.0))


def _random_jump(rng) -> JumpOUParams:
    m = -_random_spd(rng, lo=0.05, hi=1.0)
    return JumpOUParams(_random_spd(rng), m, rng.uniform(0.05, 2.0),
                        WishartJumps(rng.uniform(1.5, 5.0), _random_spd(rng, lo=0.05, hi=0.5)))


def _fmt_z(est: McEstimate, value: float) -> str:
    return f"{est.z_score(value):+.2f}"


# ---------------------------------------------------------------- criteria


def criterion_1(ctx: Context, scale: Scale) -> list[Check]:
    rng = _rng(1)
    worst = 0.0
    for _ in range(scale.rk4_cases):
        p = _random_wishart(rng)
        tau = rng.uniform(0.05, 3.0)
        u = _random_spd(rng, lo=0.0, hi=1.0)
        ref_phi, ref_psi = _riccati_rk4(p, tau, u, n_steps=1000)
        got = wishart_psi_phi(p, tau, u)
        worst = max(worst, abs(got.phi - ref_phi), float(np.abs(got.psi - ref_psi).max()))
    return [Check("closed form vs RK4", worst <= 1e-8, f"max abs error {worst:.2e} over {scale.rk4_cases} cases")]


def _flow_residual(model, u, t, s) -> float:
    phi_ts, psi_ts, _ = coeffs(model, t + s, u)
    phi_t, psi_t, _ = coeffs(model, t, u)
    phi_s, psi_s, _ = coeffs(model, s, psi_t)
    return max(abs(float(phi_ts - phi_t - phi_s)), float(np.abs(psi_ts - psi_s).max()))


def criterion_2(ctx: Context, scale: Scale) -> list[Check]:
    checks = []
    for name, make in (("wishart", _random_wishart), ("jump_ou", _random_jump)):
        rng = _rng(2 if name == "wishart" else 3)
        worst = 0.0
        for _ in range(scale.flow_cases):
            model = make(rng)
            u = _random_spd(rng, lo=0.0, hi=1.0)
            t, s = rng.uniform(0.0, 2.0, 2)
            worst = max(worst, _flow_residual(model, u, t, s))
        checks.append(Check(f"flow {name}", worst <= 1e-9, f"max residual {worst:.2e}"))
    return checks


def criterion_3(ctx: Context, scale: Scale) -> list[Check]:
    model, fam = ctx.model, ctx.family
    n_live = fam.n_tenors - 1
    cfg = ctx.paths(scale.martingale_paths)
    cfg.check_step(fam.delta_t)
    steps = int(round(fam.horizon / (fam.delta_t / 8)))
    times = np.linspace(0.0, fam.horizon, steps + 1)
    ks = np.arange(1, n_live + 1)
    maturities = fam.curve.maturities
    # column of each tenor date T_j on the grid
    tenor_cols = [int(np.argmin(np.abs(times - maturities[j - 1]))) for j in ks]
    total = np.zeros((n_live, n_live))
    total_sq = np.zeros((n_live, n_live))
    n = 0
    lowest = math.inf
    for states in iter_chunks(model, times, cfg):
        n += states.shape[0]
        for col, t in enumerate(times):
            vals = np.exp(log_martingale(model, fam, float(t), ks, states[:, col]))
            lowest = min(lowest, float(vals.min()))
            if col in tenor_cols:
                j = tenor_cols.index(col)
                total[j] += vals.sum(axis=0)
                total_sq[j] += (vals ** 2).sum(axis=0)
    m0 = np.exp(log_martingale(model, fam, 0.0, ks, model.sigma0[None]))[0]
    mean = total / n
    se = np.sqrt(np.maximum(total_sq / n - mean ** 2, 0.0) / (n - 1))
    worst_z = 0.0
    for j in range(n_live):
        for k in range(j, n_live):
            worst_z = max(worst_z, abs(mean[j, k] - m0[k]) / se[j, k])
    return [
        Check("E[M^{u_k}_{T_j}] = M^{u_k}_0", worst_z <= 3.0, f"max |z| {worst_z:.2f} over {n} paths"),
        Check("M^{u_k}_t > 1 on every path", lowest > 1.0, f"min {lowest:.6f}"),
    ]


def criterion_4(ctx: Context, scale: Scale) -> list[Check]:
    fam = ctx.family
    rel = float(np.max(np.abs(fam.residuals)))
    diffs = np.diff(fam.xis)
    return [
        Check("fit residual", rel <= 1e-12, f"max relative residual {rel:.2e}, scale {fam.scale:g}"),
        Check("xi strictly decreasing", bool(np.all(diffs < 0)), f"max step {diffs.max():.3e}"),
    ]


def _smile(curve: TenorCurve, k: int, points: int) -> np.ndarray:
    fwd = curve.forward_libor(k)
    return fwd * (1.0 + 0.06 * math.sqrt(curve.maturity(k)) * np.linspace(-1.0, 1.0, points))


CAPLET_TENORS = (1, 6, 8)


def criterion_5(ctx: Context, scale: Scale) -> list[Check]:
    model, fam, curve = ctx.model, ctx.family, ctx.curve
    ks = [k for k in CAPLET_TENORS if k < fam.n_tenors]
    worst_z, worst_itm, worst_parity, worst_alpha = 0.0, 0.0, 0.0, 0.0
    cfg = ctx.paths(scale.caplet_paths)
    for k in ks:
        strikes = _smile(curve, k, 9)
        prices = price_caplets(model, fam, k, strikes, ctx.fourier)
        for est, pr in zip(mc_caplets(model, fam, k, strikes, cfg), prices):
            worst_z = max(worst_z, abs(est.z_score(pr)))
        # strike factor 1 + dT K = 1e-6: the option is certain to be exercised
        deep = -(1.0 - 1e-6) / fam.delta_t
        itm = price_caplets(model, fam, k, [deep], ctx.fourier)[0]
        target = curve.bond(k) - 1e-6 * curve.bond(k + 1)
        worst_itm = max(worst_itm, abs(itm / target - 1.0))
        floors = price_floorlets(model, fam, k, strikes, ctx.fourier, method="fourier")
        forward_value = curve.bond(k) - (1.0 + fam.delta_t * strikes) * curve.bond(k + 1)
        worst_parity = max(worst_parity, float(np.abs(prices - floors - forward_value).max()))
        lo = price_caplets(model, fam, k, strikes, FourierConfig(alpha=0.75))
        hi = price_caplets(model, fam, k, strikes, FourierConfig(alpha=1.5))
        worst_alpha = max(worst_alpha, float(np.max(np.abs(lo / hi - 1.0))))
    return [
        Check("Fourier vs Monte Carlo", worst_z <= 3.0, f"max |z| {worst_z:.2f}, {len(ks)} x 9 strikes"),
        Check("deep in-the-money limit", worst_itm <= 1e-5, f"max relative error {worst_itm:.2e}"),
        Check("cap-floor parity", worst_parity <= 1e-10, f"max abs error {worst_parity:.2e}"),
        Check("damping invariance", worst_alpha <= 1e-7, f"max relative difference {worst_alpha:.2e}"),
    ]


SWAPTIONS = ((3, 6), (3, 9), (6, 12))


def criterion_6(ctx: Context, scale: Scale) -> list[Check]:
    model, fam, curve = ctx.model, ctx.family, ctx.curve
    cfg = ctx.paths(scale.swaption_paths)
    worst_z, details, decay_ok, decay = 0.0, [], True, []
    for i, m in SWAPTIONS:
        if m > fam.n_tenors:
            continue
        spec = SwaptionSpec(i, m, forward_swap_rate(curve, i, m))
        engine = _MomentEngine(model, fam, spec, 50)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = {o: swaption_breakdown(model, fam, spec, o, engine=engine).price for o in (3, 5, ctx.order)}
        est = mc_price(spec, model, fam, cfg)
        worst_z = max(worst_z, abs(est.z_score(p[ctx.order])))
        details.append(f"{i}x{m}: z={_fmt_z(est, p[ctx.order])}")
        d35, d57 = abs(p[3] - p[5]), abs(p[5] - p[ctx.order])
        decay_ok &= d57 < d35
        decay.append(f"{i}x{m}: |p3-p5|={d35:.1e} |p5-p7|={d57:.1e}")
    k = 3
    strike = curve.forward_libor(k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        single = swaption_breakdown(model, fam, SwaptionSpec(k, k + 1, strike), ctx.order).price
    floor = price_floorlets(model, fam, k, [strike], ctx.fourier)[0]
    rel = abs(single / floor - 1.0)
    return [
        Check("expansion vs Monte Carlo", worst_z <= 3.0, "; ".join(details)),
        Check("single-period swaption = floorlet", rel <= 5e-4, f"relative difference {rel:.2e}"),
        Check("order convergence", decay_ok, "; ".join(decay)),
    ]


def criterion_7(ctx: Context, scale: Scale) -> list[Check]:
    model, fam, curve = ctx.model, ctx.family, ctx.curve
    i, m = 3, 9
    spec = SwaptionSpec(i, m, forward_swap_rate(curve, i, m))
    engine = _MomentEngine(model, fam, spec, 50)
    cfg = ctx.paths(scale.moment_paths)
    checks = []
    for measure in (i, m):
        est = mc_coupon_bond_moments(model, fam, spec, [1, 2, 3, 4], measure, cfg)
        with mpmath.workdps(50):
            zs = [e.z_score(float(engine.moment(q, measure))) for q, e in zip((1, 2, 3, 4), est)]
        checks.append(Check(f"moments under P_T{measure}", max(abs(z) for z in zs) <= 4.0,
                            "z = " + ", ".join(f"{z:+.2f}" for z in zs)))
    return checks


def criterion_8(ctx: Context, scale: Scale) -> list[Check]:
    rng = _rng(8)
    lo, hi = math.inf, -math.inf
    for _ in range(scale.skew_cases):
        b = _random_spd(rng, lo=0.01, hi=3.0)
        q = rng.normal(size=(2, 2)) + 0.5 * np.eye(2)
        s = _random_spd(rng, lo=0.05, hi=5.0)
        v = skew_from_matrices(b, q, s)
        lo, hi = min(lo, v), max(hi, v)
    one_dim = max(abs(skew_from_matrices([[b]], [[q]], [[s]]) - 1.0)
                  for b, q, s in rng.uniform(0.01, 5.0, (50, 3)))
    return [
        Check("skew in (0, 1]", lo > 0.0 and hi <= 1.0 + 1e-12, f"range [{lo:.6f}, {hi:.15f}]"),
        Check("skew = 1 for d = 1", one_dim <= 1e-12, f"max deviation {one_dim:.1e}"),
    ]


SMILE_TENORS = (1, 8)


def _smile_vols(model: WishartParams, curve: TenorCurve, points: int, cfg: FourierConfig) -> np.ndarray:
    """Black vols on the 4m and 32m smiles after refitting the curve under ``model``."""
    fam = fit_term_structure(model, curve)
    rows = []
    for k in SMILE_TENORS:
        strikes = _smile(curve, k, points)
        prices = price_caplets(model, fam, k, strikes, cfg)
        fwd, expiry, df = curve.forward_libor(k), curve.maturity(k), curve.bond(k + 1)
        row = []
        for pr, kk in zip(prices, strikes):
            try:
                row.append(black_implied_vol(pr / curve.delta_t, fwd, kk, expiry, df))
            except OutOfBand:
                row.append(math.nan)
        rows.append(row)
    return np.array(rows)


def _atm_slope(model: WishartParams, curve: TenorCurve, cfg: FourierConfig) -> float:
    fam = fit_term_structure(model, curve)
    ks = range(1, curve.n_tenors)
    vols = []
    for k in ks:
        fwd = curve.forward_libor(k)
        pr = price_caplets(model, fam, k, [fwd], cfg)[0]
        vols.append(black_implied_vol(pr / curve.delta_t, fwd, fwd, curve.maturity(k), curve.bond(k + 1)))
    return float(np.polyfit([curve.maturity(k) for k in ks], vols, 1)[0])


def _share(delta: np.ndarray, sign: int) -> float:
    ok = np.isfinite(delta)
    return float(np.mean(sign * delta[ok] > 0)) if np.any(ok) else 0.0


def _perturbed(base: WishartParams, **kw) -> WishartParams:
    fields = {"sigma0": base.sigma0, "m": base.m, "q": base.q, "kappa": base.kappa}
    fields.update(kw)
    return WishartParams(**fields)


def criterion_9(ctx: Context, scale: Scale) -> list[Check]:
    base, curve, cfg = ctx.model, ctx.curve, ctx.fourier
    pts = scale.smile_points
    ref = _smile_vols(base, curve, pts, cfg)
    checks = []

    def directional(name, model, sign, ref_vols=ref):
        delta = _smile_vols(model, curve, pts, cfg) - ref_vols
        share = _share(delta, sign)
        checks.append(Check(name, share >= 0.9,
                            f"{share:.0%} of cells move {'up' if sign > 0 else 'down'}; "
                            f"change in [{np.nanmin(delta):+.2e}, {np.nanmax(delta):+.2e}]"))

    directional("kappa x2 raises vols", _perturbed(base, kappa=2 * base.kappa), +1)
    m = base.m.copy()
    m[0, 0] *= 1.8
    directional("|M11| x1.8 lowers vols", _perturbed(base, m=m), -1)
    q = base.q.copy()
    q[0, 0] *= 2.0
    q_model = _perturbed(base, q=q)
    directional("Q11 x2 raises vols", q_model, +1)
    s0, s1 = _atm_slope(base, curve, cfg), _atm_slope(q_model, curve, cfg)
    checks.append(Check("Q11 x2 steepens ATM term structure", s1 > s0, f"slope {s0:.2e} -> {s1:.2e}"))
    sigma = base.sigma0.copy()
    sigma[0, 1] = sigma[1, 0] = 2.0
    off = _perturbed(base, sigma0=sigma)
    off_ref = _smile_vols(off, curve, pts, cfg)
    for (i, j), label in (((0, 1), "M12"), ((1, 0), "M21")):
        for eps, sign, word in ((1e-3, +1, "raises"), (-1e-3, -1, "lowers")):
            mm = base.m.copy()
            mm[i, j] = eps
            directional(f"{label}={eps:+g} {word} vols (Sigma0_12=2)", _perturbed(off, m=mm), sign, off_ref)
    return checks


LAPLACE_POINTS = (
    (1.0, 0.05 * np.eye(2)),
    (0.5, np.diag([0.2, 0.1])),
    (2.0, np.array([[0.1, 0.05], [0.05, 0.2]])),
    (3.0, np.diag([0.05, 0.3])),
    (5.0, np.array([[0.3, -0.1], [-0.1, 0.15]])),
)


def criterion_10(ctx: Context, scale: Scale) -> list[Check]:
    model = ctx.jump_model
    cfg = dataclasses.replace(ctx.paths(scale.laplace_paths), dt=1.0 / 24.0)
    zs = []
    for t, u in LAPLACE_POINTS:
        est = mc_laplace(model, t, [u], cfg)[0]
        zs.append(est.z_score(laplace(model, t, u)))
    zero = laplace(model, 2.0, np.zeros((model.dim, model.dim)))
    return [
        Check("Laplace vs compound-Poisson Monte Carlo", max(abs(z) for z in zs) <= 3.0,
              "z = " + ", ".join(f"{z:+.2f}" for z in zs)),
        Check("transform at u = 0", zero == 1.0, f"value {zero!r}"),
    ]


def criterion_11(ctx: Context, scale: Scale) -> list[Check]:
    model = ctx.model
    s = model.long_run_mean()
    res = float(np.abs(model.m @ s + s @ model.m.T + model.kappa * model.qtq).max())
    checks = [Check("Lyapunov residual", res <= 1e-12, f"max abs residual {res:.2e}")]
    diag = np.diag(np.diag(model.m))
    if np.allclose(model.m, diag) and np.allclose(model.q, np.diag(np.diag(model.q))):
        closed = model.kappa * np.diag(model.qtq) / (-2.0 * np.diag(model.m))
        rel = float(np.max(np.abs(np.diag(s) / closed - 1.0)))
        checks.append(Check("diagonal closed form", rel <= 1e-14, f"max relative error {rel:.1e}"))
    return checks


CRITERIA: dict[int, tuple[str, Callable[[Context, Scale], list[Check]]]] = {
    1: ("transform vs RK4", criterion_1),
    2: ("flow property", criterion_2),
    3: ("martingale and positivity", criterion_3),
    4: ("curve fit", criterion_4),
    5: ("caplet pricing", criterion_5),
    6: ("swaption pricing", criterion_6),
    7: ("moment engine", criterion_7),
    8: ("skew bounds", criterion_8),
    9: ("directional volatility effects", criterion_9),
    10: ("pure-jump Laplace transform", criterion_10),
    11: ("Lyapunov long-run mean", criterion_11),
}


def run_criterion(number: int, ctx: Context | None = None, suite: str = "full") -> CriterionResult:
    ctx = ctx or Context()
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    checks = fn(ctx, SUITES[suite])
    return CriterionResult(number, title, checks, time.perf_counter() - start)


def run_suite(suite: str = "full", ctx: Context | None = None, numbers=None,
              report: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {sorted(SUITES)}")
    ctx = ctx or Context()
    results = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n, ctx, suite)
        results.append(res)
        if report:
            report(res)
    return results
