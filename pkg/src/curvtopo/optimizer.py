"""Spectral projected gradient on the resource-constrained box.

The admissible set is ``{0 <= w <= 1, R_L |Q| <= int w <= R_U |Q|}``. The outer
loop takes Barzilai-Borwein steps along the projected gradient direction and
accepts them with a nonmonotone Armijo test against the largest of the last
``memory`` objective values (Grippo-Lampariello-Lucidi style), backtracking by
safeguarded quadratic interpolation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdmissibleSet", "SPGParams", "OptimState", "project", "spg_step", "run"]


@dataclass(frozen=True)
class AdmissibleSet:
    r_lower: float = 0.5
    r_upper: float = 0.5

    def __post_init__(self):
        if not 0 < self.r_lower <= self.r_upper < 1:
            raise ValueError(f"need 0 < R_L <= R_U < 1, got R_L={self.r_lower}, R_U={self.r_upper}")


def project(w_raw: np.ndarray, aset: AdmissibleSet) -> np.ndarray:
    """Euclidean projection onto the admissible set.

    The minimizer has the form ``clip(w_raw + lam, 0, 1)``; ``lam`` is located
    by bisection on the volume fraction and then polished on the final free set.
    """
    w_raw = np.asarray(w_raw, dtype=float)
    x = np.clip(w_raw, 0.0, 1.0)
    frac = x.mean()
    if aset.r_lower <= frac <= aset.r_upper:
        return x
    target = aset.r_lower if frac < aset.r_lower else aset.r_upper
    lo, hi = -float(w_raw.max()), 1.0 - float(w_raw.min())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(w_raw + mid, 0.0, 1.0).mean() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    shifted = w_raw + lam
    free = (shifted > 0) & (shifted < 1)
    if free.any():
        lam_exact = (target * w_raw.size - np.count_nonzero(shifted >= 1) - w_raw[free].sum()) / free.sum()
        cand = np.clip(w_raw + lam_exact, 0.0, 1.0)
        if abs(cand.mean() - target) <= abs(np.clip(shifted, 0, 1).mean() - target):
            return cand
    return np.clip(shifted, 0.0, 1.0)


@dataclass(frozen=True)
class SPGParams:
    memory: int = 10
    gamma: float = 1e-4
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    max_backtracks: int = 30
    shrink_lo: float = 0.1
    shrink_hi: float = 0.5
    # step used when <s, y> <= 0: jump to "max" (standard), or "keep" the previous one, or "min"
    nonpositive_curvature: str = "max"

    def __post_init__(self):
        if self.nonpositive_curvature not in ("keep", "max", "min"):
            raise ValueError(f"nonpositive_curvature must be keep, max or min, got {self.nonpositive_curvature!r}")
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max")
        if self.memory < 1 or self.max_backtracks < 1:
            raise ValueError("memory and max_backtracks must be positive")


@dataclass
class OptimState:
    w: np.ndarray
    F: float
    grad: np.ndarray
    alpha: float
    history_F: deque = field(default_factory=deque)
    iteration: int = 0
    nfunc: int = 0
    ngrad: int = 0
    stationary: bool = False
    stagnated: bool = False


def stationarity(w, grad, aset: AdmissibleSet) -> float:
    return float(np.max(np.abs(project(w - grad, aset) - w)))


def spg_step(state: OptimState, objective, aset: AdmissibleSet, params: SPGParams = SPGParams(),
             cell_volume: float = 1.0):
    """One projected-gradient iteration; returns ``(new_state, record)``.

    ``objective`` provides ``value(w)`` and ``gradient(w)``; the gradient is
    requested only at the accepted point. Inner products are L2 pairings,
    weighted by ``cell_volume``, since the gradient is a density.
    """
    w, g = state.w, state.grad
    d = project(w - state.alpha * g, aset) - w
    slope = float(np.vdot(g, d)) * cell_volume
    record = dict(backtracks=0, step=0.0)
    if not np.any(d) or slope >= 0:
        state.stationary = True
        state.iteration += 1
        return state, record

    f_ref = max(state.history_F)
    theta = 1.0
    for nb in range(params.max_backtracks + 1):
        trial = w + theta * d
        f_new = objective.value(trial)
        state.nfunc += 1
        if f_new <= f_ref + params.gamma * theta * slope:
            break
        record["backtracks"] = nb + 1
        # minimizer of the quadratic through f(w), slope and f(trial)
        denom = 2.0 * (f_new - state.F - theta * slope)
        t_new = -slope * theta**2 / denom if denom > 0 else params.shrink_hi * theta
        theta = float(np.clip(t_new, params.shrink_lo * theta, params.shrink_hi * theta))
    else:
        state.stagnated = True
        state.iteration += 1
        return state, record

    g_new = objective.gradient(trial)
    state.ngrad += 1
    s = trial - w
    y = g_new - g
    sy = float(np.vdot(s, y))
    if sy > 0:
        alpha = float(np.vdot(s, s)) / sy
    else:
        alpha = {"max": params.alpha_max, "min": params.alpha_min, "keep": state.alpha}[params.nonpositive_curvature]
    alpha = float(np.clip(alpha, params.alpha_min, params.alpha_max))

    hist = deque(state.history_F, maxlen=params.memory)
    hist.append(f_new)
    new = OptimState(trial, f_new, g_new, alpha, hist, state.iteration + 1, state.nfunc, state.ngrad)
    record.update(step=theta * state.alpha, f_ref=f_ref, change=float(np.mean(np.abs(s))))
    return new, record


def run(problem, w0=None, max_iter: int = 100, tol: float = 1e-3, params: SPGParams = SPGParams(),
        objective=None, callback=None):
    """Optimize until the mean per-cell design change drops below ``tol``.

    Returns ``(state, history, status)``; ``history`` holds one dict per
    iteration, row 0 describing the initial design, and ``status`` is one of
    ``converged``, ``stationary``, ``stagnated`` or ``budget``.
    """
    if objective is None:
        from .functional import CurvatureObjective

        objective = CurvatureObjective(problem)
    aset = problem.bounds
    grid = problem.grid
    if w0 is None:
        w0 = 0.5
    w = project(np.broadcast_to(np.asarray(w0, dtype=float), grid.shape).copy(), aset)
    F = objective.value(w)
    g = objective.gradient(w)
    gmax = float(np.max(np.abs(g)))
    alpha0 = 1.0 / gmax if gmax > 0 else 1.0
    state = OptimState(w, F, g, alpha0, deque([F], maxlen=params.memory), 0, 1, 1)

    def linear_iters():
        return getattr(objective, "linear_iterations", 0)

    last_lin = linear_iters()
    history = [dict(iter=0, F=F, volume=float(w.mean()), step=0.0, backtracks=0, mgcg=last_lin,
                    stationarity=stationarity(w, g, aset), change=float("nan"))]
    if callback:
        callback(state, history[-1])
    status = "budget"
    for _ in range(max_iter):
        state, rec = spg_step(state, objective, aset, params, grid.cell_volume)
        lin = linear_iters()
        # a terminal non-step still gets a row, so len(history) == iteration + 1
        row = dict(iter=state.iteration, F=state.F, volume=float(state.w.mean()), step=rec["step"],
                   backtracks=rec["backtracks"], mgcg=lin - last_lin,
                   stationarity=stationarity(state.w, state.grad, aset), change=rec.get("change", 0.0))
        last_lin = lin
        history.append(row)
        if callback:
            callback(state, row)
        if state.stationary:
            status = "stationary"
            break
        if state.stagnated:
            status = "stagnated"
            break
        if rec["change"] < tol:
            status = "converged"
            break
    return state, history, status
