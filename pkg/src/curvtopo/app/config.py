"""Run configuration: flat ``key = value`` files and the built-in example presets.

Parsing is fail-closed: unknown keys, malformed values, out-of-range values and
missing required keys are all rejected with the offending key in the message.
A file may start from a preset with ``base = <preset name>`` and then override
single keys; without a base every non-io key must be present.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..fields import CurvatureSettings
from ..functional import CurvatureThreshold, FunctionalSpec, StaticBox, WholeDomain
from ..grid import make_grid
from ..optimizer import AdmissibleSet, SPGParams
from ..pde import Material
from ..problem import DesignProblem

__all__ = ["ConfigError", "RunConfig", "PRESETS", "load_config", "parse_config", "dump_config", "build_problem",
           "source_field", "spg_params"]

SOURCES = ("constant", "cos-product", "cos-sin")
SUPPORTS = ("whole", "box", "threshold")
IO_KEYS = ("out", "checkpoint_stride", "write_vtk", "write_pgm")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    name: str = "custom"
    # grid
    dim: int = 2
    n: int = 256
    # physics
    k_alpha: float = 2.0
    k_beta: float = 1.0
    q: float = 1.0
    source: str = "constant"
    source_value: float = 1.0
    source_freq: tuple = (3, 3)
    u0: float = 0.0
    # functional
    a: float = -1.0
    b: int = 0
    c: int = 1
    kappa0: float = 0.0
    support: str = "box"
    box_lo: tuple = (-0.25, -0.25)
    box_hi: tuple = (0.25, 0.25)
    kappa_thr: float = -6.0
    support_frozen: bool = True
    # optimizer
    r_lower: float = 0.5
    r_upper: float = 0.5
    max_iter: int = 100
    tol: float = 1e-3
    sigma_factor: float = 3.0
    epsilon: float = 1e-20
    include_h1: bool = False
    adjoint_sign: int = -1
    mg_tol: float = 1e-20
    mg_max_iter: int = 200
    bb_nonpositive: str = "max"
    # studies
    sweep_n: tuple = ()
    sweep_ratio: tuple = ()
    # io
    out: str = "out"
    checkpoint_stride: int = 10
    write_vtk: bool = True
    write_pgm: bool = True

    def __post_init__(self):
        _validate(self)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


_TUPLE_INT = ("source_freq", "sweep_n", "sweep_ratio")
_TUPLE_FLOAT = ("box_lo", "box_hi")


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(key, msg)


def _validate(c: RunConfig):
    _check(c.dim in (2, 3), "dim", f"must be 2 or 3, got {c.dim}")
    _check(c.n >= 4 and (c.n & (c.n - 1)) == 0, "n", f"must be a power of two >= 4, got {c.n}")
    _check(c.k_beta > 0, "k_beta", f"must be positive, got {c.k_beta}")
    _check(c.k_alpha > c.k_beta, "k_alpha", f"must exceed k_beta={c.k_beta}, got {c.k_alpha}")
    _check(c.q >= 1, "q", f"must be >= 1, got {c.q}")
    _check(c.source in SOURCES, "source", f"must be one of {', '.join(SOURCES)}, got {c.source!r}")
    _check(len(c.source_freq) == c.dim and all(f >= 0 for f in c.source_freq), "source_freq",
           f"needs {c.dim} non-negative integers, got {c.source_freq}")
    _check(np.isfinite(c.u0), "u0", "must be finite")
    _check(np.isfinite(c.a), "a", "must be finite")
    _check(c.b >= 0, "b", f"must be a non-negative integer, got {c.b}")
    _check(c.c >= 1, "c", f"must be an integer >= 1, got {c.c}")
    _check(c.support in SUPPORTS, "support", f"must be one of {', '.join(SUPPORTS)}, got {c.support!r}")
    if c.support == "box":
        for key in ("box_lo", "box_hi"):
            v = getattr(c, key)
            _check(len(v) == c.dim, key, f"needs {c.dim} values, got {len(v)}")
            _check(all(-0.5 < x < 0.5 for x in v), key, "must lie strictly inside (-0.5, 0.5)")
        _check(all(lo < hi for lo, hi in zip(c.box_lo, c.box_hi)), "box_hi", "must exceed box_lo on every axis")
    _check(0 < c.r_lower < 1, "r_lower", f"must lie in (0, 1), got {c.r_lower}")
    _check(c.r_lower <= c.r_upper < 1, "r_upper", f"must lie in [r_lower, 1), got {c.r_upper}")
    _check(c.max_iter >= 1, "max_iter", f"must be >= 1, got {c.max_iter}")
    _check(c.tol > 0, "tol", f"must be positive, got {c.tol}")
    _check(c.sigma_factor >= 2, "sigma_factor", f"must be >= 2 cells, got {c.sigma_factor}")
    _check(c.epsilon > 0, "epsilon", f"must be positive, got {c.epsilon}")
    _check(c.adjoint_sign in (-1, 1), "adjoint_sign", f"must be +1 or -1, got {c.adjoint_sign}")
    _check(0 < c.mg_tol < 1, "mg_tol", f"must lie in (0, 1), got {c.mg_tol}")
    _check(c.mg_max_iter >= 1, "mg_max_iter", f"must be >= 1, got {c.mg_max_iter}")
    _check(c.bb_nonpositive in ("max", "keep", "min"), "bb_nonpositive", f"must be max, keep or min, got {c.bb_nonpositive!r}")
    _check(all(x >= 4 and (x & (x - 1)) == 0 for x in c.sweep_n), "sweep_n", "entries must be powers of two >= 4")
    _check(all(x > 1 for x in c.sweep_ratio), "sweep_ratio", "conductivity ratios must exceed 1")
    _check(c.checkpoint_stride >= 1, "checkpoint_stride", f"must be >= 1, got {c.checkpoint_stride}")


# --------------------------------------------------------------------- presets

def _derive(base: RunConfig, name: str, **kw) -> RunConfig:
    return replace(base, name=name, **kw)


def _presets() -> dict:
    p = {}
    p["ex2d1"] = RunConfig(name="ex2d1")
    p["ex2d2"] = _derive(p["ex2d1"], "ex2d2", b=1)
    p["ex2d3"] = _derive(p["ex2d1"], "ex2d3", k_alpha=200.0, q=5.0)
    p["ex2d4"] = _derive(p["ex2d1"], "ex2d4", support="threshold", kappa_thr=-6.0)
    p["ex2d5"] = _derive(p["ex2d4"], "ex2d5", b=1)
    p["ex2d6"] = _derive(p["ex2d4"], "ex2d6", a=1.0)
    p["ex2d7"] = _derive(p["ex2d4"], "ex2d7", k_alpha=200.0, q=5.0)
    p["ex2d8"] = _derive(p["ex2d7"], "ex2d8", a=1.0)
    p["ex2d9"] = _derive(p["ex2d4"], "ex2d9", source="cos-product", source_freq=(3, 3))
    p["ex2d10"] = _derive(p["ex2d9"], "ex2d10", b=1)
    p["ex2d11"] = _derive(p["ex2d9"], "ex2d11", a=1.0, q=10.0)
    p["ex2d12"] = _derive(p["ex2d11"], "ex2d12", b=1)
    p["ex2d13"] = _derive(p["ex2d4"], "ex2d13", source="cos-sin", source_freq=(1, 1))
    p["ex2d14"] = _derive(p["ex2d13"], "ex2d14", b=1)
    p["ex3d1"] = RunConfig(name="ex3d1", dim=3, n=32, support="threshold", kappa_thr=-3.0,
                           box_lo=(-0.25,) * 3, box_hi=(0.25,) * 3, source_freq=(3, 3, 3))
    p["grid-study"] = _derive(p["ex2d4"], "grid-study", sweep_n=(32, 64, 128, 256, 512, 1024))
    p["perf-table"] = _derive(p["ex2d4"], "perf-table", sweep_n=(64, 128, 256), sweep_ratio=(2, 10, 100))
    return p


PRESETS = _presets()


# --------------------------------------------------------------------- parsing

def _parse_bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _parse_value(key, text, kind):
    try:
        if key in _TUPLE_INT:
            items = [s for s in text.replace(",", " ").split() if s]
            vals = [float(s) for s in items]
            if any(v != int(v) for v in vals):
                raise ValueError
            return tuple(int(v) for v in vals)
        if key in _TUPLE_FLOAT:
            return tuple(float(s) for s in text.replace(",", " ").split() if s)
        if kind is bool:
            return _parse_bool(key, text)
        if kind is int:
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None


_KINDS = {f.name: (f.type if not isinstance(f.type, str) else {"int": int, "float": float, "bool": bool,
                                                              "str": str, "tuple": tuple}[f.type])
          for f in fields(RunConfig)}
_REQUIRED = tuple(k for k in _KINDS if k not in IO_KEYS and k not in ("name", "sweep_n", "sweep_ratio"))
_CONDITIONAL = {"box_lo": ("support", "box"), "box_hi": ("support", "box"), "kappa_thr": ("support", "threshold"),
                "support_frozen": ("support", "threshold"), "source_value": ("source", "constant"),
                "source_freq": ("source", "!constant")}


def parse_config(text: str, origin: str = "<string>") -> RunConfig:
    """Parse the flat ``key = value`` format; ``#`` starts a comment."""
    values = {}
    base = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value' in {origin}, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values or (key == "base" and base is not None):
            raise ConfigError(key, "given twice")
        if key == "base":
            if val not in PRESETS:
                raise ConfigError("base", f"unknown preset {val!r}")
            base = PRESETS[val]
            continue
        if key not in _KINDS:
            raise ConfigError(key, "unknown key")
        values[key] = _parse_value(key, val, _KINDS[key])
    if base is None:
        for key in _REQUIRED:
            if key in values:
                continue
            if key in _CONDITIONAL:
                dep, want = _CONDITIONAL[key]
                have = values.get(dep)
                needed = have != want[1:] if want.startswith("!") else have == want
                if not needed:
                    continue
            raise ConfigError(key, "missing required key")
        base = RunConfig()
        if values.get("dim") == 3:
            values = {"box_lo": (-0.25,) * 3, "box_hi": (0.25,) * 3, "source_freq": (3, 3, 3), **values}
    try:
        return replace(base, **values)
    except ConfigError:
        raise
    except TypeError as exc:  # pragma: no cover - guarded by the key check above
        raise ConfigError("config", str(exc)) from None


def load_config(spec: str | Path) -> RunConfig:
    """A preset name or the path of a config file."""
    if isinstance(spec, str) and spec in PRESETS:
        return PRESETS[spec]
    path = Path(spec)
    if not path.is_file():
        raise ConfigError("config", f"{spec!r} is neither a preset nor a readable file")
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "name":
            lines.append(f"# {v}")
            continue
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------- problem assembly

def source_field(cfg: RunConfig, grid) -> np.ndarray:
    """constant: g = value; cos-product: prod cos(k_i pi x_i); cos-sin: cos(k_0 pi x_0) prod sin(k_i pi x_i)."""
    if cfg.source == "constant":
        return np.full(grid.shape, cfg.source_value)
    x = grid.centers()
    freq = cfg.source_freq
    if cfg.source == "cos-product":
        out = np.ones(grid.shape)
        for xi, k in zip(x, freq):
            out = out * np.cos(k * np.pi * xi)
        return out
    out = np.cos(freq[0] * np.pi * x[0])
    for xi, k in zip(x[1:], freq[1:]):
        out = out * np.sin(k * np.pi * xi)
    return out


def build_problem(cfg: RunConfig, n: int | None = None) -> DesignProblem:
    grid = make_grid(cfg.dim, n or cfg.n)
    if cfg.support == "whole":
        support = WholeDomain()
    elif cfg.support == "box":
        support = StaticBox(tuple(cfg.box_lo), tuple(cfg.box_hi))
    else:
        support = CurvatureThreshold(cfg.kappa_thr, cfg.support_frozen)
    return DesignProblem(
        grid=grid,
        material=Material(cfg.k_alpha, cfg.k_beta, cfg.q),
        source=source_field(cfg, grid),
        functional=FunctionalSpec(cfg.a, cfg.b, cfg.c, cfg.kappa0, support),
        bounds=AdmissibleSet(cfg.r_lower, cfg.r_upper),
        u0=cfg.u0,
        curvature=CurvatureSettings(cfg.epsilon),
        sigma_factor=cfg.sigma_factor,
        include_h1=cfg.include_h1,
        adjoint_sign=cfg.adjoint_sign,
        mg_tol=cfg.mg_tol,
        mg_max_iter=cfg.mg_max_iter,
    )


def spg_params(cfg: RunConfig) -> SPGParams:
    return SPGParams(nonpositive_curvature=cfg.bb_nonpositive)
