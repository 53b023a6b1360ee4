"""JSON model configuration: load, validate with field paths and line numbers, dump.

Layout (matrices are row-major lists with an explicit ``dim``)::

    {
      "schema_version": 1,
      "process": "wishart" | "jump_ou",
      "params": {
        "dim": 2,
        "sigma0": [...], "m": [...],
        "q": [...], "kappa": 3.0,                    # wishart
        "lam": 0.1, "jump_law": {                    # jump_ou
          "type": "wishart" | "noncentral_wishart",
          "n": 3.1, "calq": [...], "calm": [...], "calm_cols": 1
        }
      },
      "curve": {"delta_t": ..., "n_tenors": N,
                "libor": [L_1, ..., L_N]}            # or "bond_ratios" + "terminal_bond"
      "fit": {"base_direction": null | [...], "auto_scale": true},
      "fourier": {"alpha": 1.0, "n_nodes": null, "v_max": null},
      "swaption": {"order": 7, "dps": 50},
      "mc": {"n_paths": ..., "dt": ..., "seed": ..., "scheme": ..., "antithetic": false, "chunk_size": ...}
    }
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .affine import JumpOUParams, Model, NonCentralWishartJumps, WishartJumps, WishartParams
from .caps import FourierConfig
from .errors import ConfigError, WishartLiborError
from .libor import TenorCurve
from .oracle import SCHEMES, McConfig

SCHEMA_VERSION = 1


@dataclass
class ModelConfig:
    process: str
    model: Model
    curve: TenorCurve
    curve_input: str = "libor"
    curve_values: np.ndarray | None = None
    base_direction: np.ndarray | None = None
    auto_scale: bool = True
    fourier: FourierConfig = field(default_factory=FourierConfig)
    order: int = 7
    dps: int = 50
    mc: McConfig = field(default_factory=McConfig)


# ---------------------------------------------------------------- parsing helpers


class _Src:
    """Maps a dotted field path back to a line of the JSON text (best effort)."""

    def __init__(self, text: str | None):
        self.text = text

    def line(self, path: str) -> int | None:
        if not self.text:
            return None
        pos = 0
        for part in path.split("."):
            if part.startswith("["):
                continue
            hit = re.compile(r'"%s"\s*:' % re.escape(part)).search(self.text, pos)
            if hit is None:
                break
            pos = hit.start()
        else:
            return self.text.count("\n", 0, pos) + 1
        return self.text.count("\n", 0, pos) + 1 if pos else None

    def error(self, msg: str, path: str) -> ConfigError:
        return ConfigError(msg, path, self.line(path))


def _get(src: _Src, obj: dict, key: str, path: str, kind=None, default=...):
    if not isinstance(obj, dict):
        raise src.error("expected an object", path)
    if key not in obj:
        if default is ...:
            raise src.error("missing field", f"{path}.{key}" if path else key)
        return default
    val = obj[key]
    where = f"{path}.{key}" if path else key
    if kind == "number":
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise src.error("expected a finite number", where)
        return float(val)
    if kind == "int":
        if isinstance(val, bool) or not isinstance(val, int):
            raise src.error("expected an integer", where)
        return val
    if kind == "bool":
        if not isinstance(val, bool):
            raise src.error("expected true or false", where)
        return val
    if kind == "str":
        if not isinstance(val, str):
            raise src.error("expected a string", where)
        return val
    return val


def _matrix(src: _Src, obj: dict, key: str, path: str, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    where = f"{path}.{key}"
    val = _get(src, obj, key, path)
    if not isinstance(val, list) or len(val) != rows * cols:
        raise src.error(f"expected a row-major list of {rows * cols} numbers ({rows}x{cols})", where)
    for j, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise src.error(f"entry {j} is not a finite number", where)
    return np.array(val, dtype=float).reshape(rows, cols)


def _numbers(src: _Src, obj: dict, key: str, path: str, length: int) -> np.ndarray:
    where = f"{path}.{key}"
    val = _get(src, obj, key, path)
    if not isinstance(val, list) or len(val) != length:
        raise src.error(f"expected a list of {length} numbers", where)
    for j, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise src.error(f"entry {j} is not a finite number", where)
    return np.array(val, dtype=float)


def _checked(src: _Src, path: str, fn, *args, **kwargs):
    """Run a domain constructor, re-raising its validation errors at ``path``.

    Messages that start with a field name (``"kappa=..."``, ``"m must ..."``)
    are attributed to that field.
    """
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        sub = f"{path}.{exc.path}" if exc.path else path
        raise src.error(str(exc).split(": ", 1)[-1], sub) from exc
    except (WishartLiborError, ValueError) as exc:
        msg = str(exc)
        head = re.match(r"[A-Za-z_][A-Za-z_0-9]*", msg)
        if head and head.group(0) in _FIELDS.get(path, ()):
            path = f"{path}.{head.group(0)}"
        raise src.error(msg, path) from exc


_FIELDS = {
    "params": ("sigma0", "m", "q", "kappa", "lam"),
    "params.jump_law": ("n", "calq", "calm"),
    "fourier": ("alpha", "n_nodes", "v_max"),
}


# ---------------------------------------------------------------- load


def parse_config(data: dict, text: str | None = None) -> ModelConfig:
    src = _Src(text)
    if not isinstance(data, dict):
        raise src.error("top level must be an object", "")
    version = _get(src, data, "schema_version", "", "int")
    if version != SCHEMA_VERSION:
        raise src.error(f"unsupported schema_version {version}", "schema_version")
    process = _get(src, data, "process", "", "str")
    if process not in ("wishart", "jump_ou"):
        raise src.error("process must be 'wishart' or 'jump_ou'", "process")

    params = _get(src, data, "params", "")
    d = _get(src, params, "dim", "params", "int")
    if d < 1:
        raise src.error("dim must be positive", "params.dim")
    sigma0 = _matrix(src, params, "sigma0", "params", d)
    m = _matrix(src, params, "m", "params", d)
    if process == "wishart":
        q = _matrix(src, params, "q", "params", d)
        kappa = _get(src, params, "kappa", "params", "number")
        model = _checked(src, "params", WishartParams, sigma0, m, q, kappa)
    else:
        lam = _get(src, params, "lam", "params", "number")
        law_obj = _get(src, params, "jump_law", "params")
        law_type = _get(src, law_obj, "type", "params.jump_law", "str")
        n = _get(src, law_obj, "n", "params.jump_law", "number")
        calq = _matrix(src, law_obj, "calq", "params.jump_law", d)
        if law_type == "wishart":
            law = _checked(src, "params.jump_law", WishartJumps, n, calq)
        elif law_type == "noncentral_wishart":
            p = _get(src, law_obj, "calm_cols", "params.jump_law", "int")
            calm = _matrix(src, law_obj, "calm", "params.jump_law", d, p)
            law = _checked(src, "params.jump_law", NonCentralWishartJumps, n, calq, calm)
        else:
            raise src.error("jump law type must be 'wishart' or 'noncentral_wishart'", "params.jump_law.type")
        model = _checked(src, "params", JumpOUParams, sigma0, m, lam, law)

    curve_obj = _get(src, data, "curve", "")
    dt = _get(src, curve_obj, "delta_t", "curve", "number")
    n_tenors = _get(src, curve_obj, "n_tenors", "curve", "int")
    if n_tenors < 2:
        raise src.error("need at least two tenors", "curve.n_tenors")
    if "libor" in curve_obj and "bond_ratios" in curve_obj:
        raise src.error("give either 'libor' or 'bond_ratios', not both", "curve")
    if "bond_ratios" in curve_obj:
        ratios = _numbers(src, curve_obj, "bond_ratios", "curve", n_tenors)
        tb = _get(src, curve_obj, "terminal_bond", "curve", "number")
        curve = _checked(src, "curve.bond_ratios", TenorCurve, dt, ratios, tb)
        curve_input, values = "bond_ratios", ratios
    else:
        rates = _numbers(src, curve_obj, "libor", "curve", n_tenors)
        curve = _checked(src, "curve.libor", TenorCurve.from_libor, dt, rates)
        curve_input, values = "libor", rates

    fit = _get(src, data, "fit", "", default={})
    base = _get(src, fit, "base_direction", "fit", default=None)
    if base is not None:
        base = _matrix(src, fit, "base_direction", "fit", d)
        base = 0.5 * (base + base.T)
        if np.linalg.eigvalsh(base)[-1] >= 0:
            raise src.error("base direction must be negative definite", "fit.base_direction")
    auto = _get(src, fit, "auto_scale", "fit", "bool", default=True)

    four = _get(src, data, "fourier", "", default={})
    n_nodes = _get(src, four, "n_nodes", "fourier", default=None)
    if n_nodes is not None:
        n_nodes = _get(src, four, "n_nodes", "fourier", "int")
    v_max = _get(src, four, "v_max", "fourier", default=None)
    if v_max is not None:
        v_max = _get(src, four, "v_max", "fourier", "number")
    fourier = _checked(src, "fourier", FourierConfig, _get(src, four, "alpha", "fourier", "number", 1.0), n_nodes, v_max)

    sw = _get(src, data, "swaption", "", default={})
    order = _get(src, sw, "order", "swaption", "int", 7)
    if not 2 <= order <= 7:
        raise src.error("order must be between 2 and 7", "swaption.order")
    dps = _get(src, sw, "dps", "swaption", "int", 50)
    if dps < 20:
        raise src.error("dps must be at least 20", "swaption.dps")

    mc_obj = _get(src, data, "mc", "", default={})
    defaults = McConfig()
    scheme = _get(src, mc_obj, "scheme", "mc", "str", defaults.scheme)
    if scheme not in SCHEMES:
        raise src.error(f"scheme must be one of {SCHEMES}", "mc.scheme")
    mc = _checked(
        src, "mc", McConfig,
        n_paths=_get(src, mc_obj, "n_paths", "mc", "int", defaults.n_paths),
        dt=_get(src, mc_obj, "dt", "mc", "number", defaults.dt),
        seed=_get(src, mc_obj, "seed", "mc", "int", defaults.seed),
        scheme=scheme,
        antithetic=_get(src, mc_obj, "antithetic", "mc", "bool", defaults.antithetic),
        chunk_size=_get(src, mc_obj, "chunk_size", "mc", "int", defaults.chunk_size),
    )
    if mc.dt > curve.delta_t / 8 + 1e-15:
        raise src.error(f"dt must not exceed delta_t/8 = {curve.delta_t / 8}", "mc.dt")
    return ModelConfig(process, model, curve, curve_input, values, base, auto, fourier, order, dps, mc)


def loads(text: str) -> ModelConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, "", exc.lineno) from exc
    return parse_config(data, text)


def load(path) -> ModelConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


# ---------------------------------------------------------------- dump


def _flat(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def to_dict(cfg: ModelConfig) -> dict:
    model = cfg.model
    params: dict = {"dim": model.dim, "sigma0": _flat(model.sigma0), "m": _flat(model.m)}
    if isinstance(model, WishartParams):
        params.update(q=_flat(model.q), kappa=float(model.kappa))
    else:
        law = model.jump_law
        jl = {"type": "wishart", "n": float(law.n), "calq": _flat(law.calq)}
        if isinstance(law, NonCentralWishartJumps):
            jl.update(type="noncentral_wishart", calm=_flat(law.calm), calm_cols=int(law.calm.shape[1]))
        params.update(lam=float(model.lam), jump_law=jl)
    curve = cfg.curve
    curve_d: dict = {"delta_t": curve.delta_t, "n_tenors": curve.n_tenors}
    if cfg.curve_input == "bond_ratios":
        values = curve.bond_ratios if cfg.curve_values is None else cfg.curve_values
        curve_d.update(bond_ratios=_flat(values), terminal_bond=curve.terminal_bond)
    else:
        values = curve.libor_rates() if cfg.curve_values is None else cfg.curve_values
        curve_d.update(libor=_flat(values))
    mc = cfg.mc
    return {
        "schema_version": SCHEMA_VERSION,
        "process": cfg.process,
        "params": params,
        "curve": curve_d,
        "fit": {"base_direction": None if cfg.base_direction is None else _flat(cfg.base_direction),
                "auto_scale": cfg.auto_scale},
        "fourier": {"alpha": cfg.fourier.alpha, "n_nodes": cfg.fourier.n_nodes, "v_max": cfg.fourier.v_max},
        "swaption": {"order": cfg.order, "dps": cfg.dps},
        "mc": {"n_paths": int(mc.n_paths), "dt": float(mc.dt), "seed": int(mc.seed), "scheme": mc.scheme,
               "antithetic": bool(mc.antithetic), "chunk_size": int(mc.chunk_size)},
    }


def dumps(cfg: ModelConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def dump(cfg: ModelConfig, path):
    Path(path).write_text(dumps(cfg))


def default_config_text() -> str:
    return resources.files("wishart_libor").joinpath("data/benchmark.json").read_text()


def default_config() -> ModelConfig:
    return loads(default_config_text())
