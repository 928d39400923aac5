"""Drive one optimization case end to end and the multi-run studies."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..functional import CurvatureObjective, DegenerateSupportError
from ..mgsolve import BreakdownError
from ..optimizer import run
from .config import RunConfig, build_problem, dump_config, spg_params
from .output import write_history, write_pgm, write_summary, write_vtk

__all__ = ["CaseResult", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_ACCEPTANCE", "optimize", "run_case",
           "perf_table", "grid_study", "refinement_mismatch", "PERF_COLUMNS"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4
PERF_COLUMNS = ("grid", "r_k", "itero", "nfunc", "ngrad", "iterm", "cpu")


@dataclass
class CaseResult:
    status: str
    exit_code: int
    w: np.ndarray | None = None
    history: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    objective: CurvatureObjective | None = None


def optimize(cfg: RunConfig, n: int | None = None, callback=None) -> CaseResult:
    """Run the optimizer for ``cfg`` without touching the disk."""
    t0 = time.perf_counter()
    problem = build_problem(cfg, n)
    objective = CurvatureObjective(problem)

    def record(state, row):
        terms = objective.last_terms
        if terms is not None:
            row.update(terms.norms(problem.grid))
        if callback:
            callback(state, row, objective)

    try:
        state, history, status = run(problem, max_iter=cfg.max_iter, tol=cfg.tol, params=spg_params(cfg),
                                     objective=objective, callback=record)
    except (BreakdownError, DegenerateSupportError, np.linalg.LinAlgError) as exc:
        summary = dict(case=cfg.name, n=problem.grid.n, dim=problem.grid.dim, status="solver-failure",
                       reason=f"{type(exc).__name__}: {exc}", wall_time=time.perf_counter() - t0)
        return CaseResult("solver-failure", EXIT_SOLVER, summary=summary, objective=objective)

    if objective.failures:
        status = "solver-failure"
    ok = status in ("converged", "stationary")
    summary = dict(
        case=cfg.name,
        dim=problem.grid.dim,
        n=problem.grid.n,
        status=status,
        reason={"converged": "design change below tolerance", "stationary": "projected gradient vanished",
                "stagnated": "line search exhausted its backtracks", "budget": "iteration budget exhausted",
                "solver-failure": "linear solver did not converge"}[status],
        F_initial=history[0]["F"],
        F_final=state.F,
        volume_fraction=float(state.w.mean()),
        itero=state.iteration,
        nfunc=state.nfunc,
        ngrad=state.ngrad,
        iterm=int(objective.linear_iterations),
        linear_solves=int(objective.linear_solves),
        linear_failures=int(objective.failures),
        wall_time=time.perf_counter() - t0,
    )
    return CaseResult(status, EXIT_OK if ok else EXIT_SOLVER, state.w, history, summary, objective)


def run_case(cfg: RunConfig, n: int | None = None, out: str | Path | None = None, max_iter: int | None = None,
             log=print) -> CaseResult:
    """Optimize and write history, summary, checkpoint fields and snapshots into ``out``."""
    if max_iter is not None:
        cfg = cfg.with_overrides(max_iter=max_iter)
    if n is not None:
        cfg = cfg.with_overrides(n=n)
    outdir = Path(out if out is not None else cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")

    def checkpoint(tag, objective, w):
        f = objective.fields(w)
        grid = objective.problem.grid
        if cfg.write_vtk:
            write_vtk(outdir / f"fields_{tag}.vtk", grid, {k: f[k] for k in ("w", "u", "p", "kappa", "support")},
                      title=f"{cfg.name} iteration {tag}")
        if cfg.write_pgm and grid.dim == 2:
            write_pgm(outdir / f"w_{tag}.pgm", f["w"])

    def on_iter(state, row, objective):
        if log:
            log(f"{cfg.name} it {row['iter']:4d}  F {row['F']: .6e}  vol {row['volume']:.6f}  "
                f"mgcg {row['mgcg']:4d}  stat {row['stationarity']:.3e}")
        if row["iter"] % cfg.checkpoint_stride == 0:
            checkpoint(f"{row['iter']:04d}", objective, state.w)

    result = optimize(cfg, callback=on_iter)
    if result.w is not None:
        checkpoint("final", result.objective, result.w)
    write_history(outdir / "history.csv", result.history)
    write_summary(outdir / "summary.json", result.summary)
    if log:
        log(f"{cfg.name}: {result.summary.get('status')} ({result.summary.get('reason')})")
    return result


def perf_table(cfg: RunConfig, out_csv: str | Path | None = None, log=print) -> list[dict]:
    """Iteration and cost counters over conductivity ratios and grids.

    Ratios above 10 switch the SIMP power to 5, as in the high-contrast runs.
    """
    ratios = cfg.sweep_ratio or (cfg.k_alpha / cfg.k_beta,)
    grids = cfg.sweep_n or (cfg.n,)
    rows = []
    for r in ratios:
        q = 5.0 if r > 10 else cfg.q
        case = cfg.with_overrides(k_alpha=cfg.k_beta * r, q=q)
        for n in grids:
            res = optimize(case, n)
            s = res.summary
            row = dict(grid=f"{n}^{cfg.dim}", r_k=r, itero=s.get("itero"), nfunc=s.get("nfunc"),
                       ngrad=s.get("ngrad"), iterm=s.get("iterm"), cpu=round(s["wall_time"], 3),
                       status=s["status"])
            rows.append(row)
            if log:
                log(", ".join(f"{k}={v}" for k, v in row.items()))
    if out_csv is not None:
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=PERF_COLUMNS, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return rows


def grid_study(cfg: RunConfig, grids=None, log=print) -> dict:
    """Final designs of the same case on successively refined grids, keyed by n."""
    designs = {}
    for n in grids or cfg.sweep_n or (cfg.n,):
        res = optimize(cfg, n)
        if res.w is None:
            raise RuntimeError(f"grid study failed at n={n}: {res.summary.get('reason')}")
        designs[n] = res.w
        if log:
            log(f"n={n}: {res.summary['status']}, itero={res.summary['itero']}, F={res.summary['F_final']:.6g}")
    return designs


def refinement_mismatch(coarse: np.ndarray, fine: np.ndarray) -> float:
    """Fraction of the domain where thresholded designs disagree, fine design averaged onto the coarse grid."""
    f = fine.shape[0] // coarse.shape[0]
    if f * coarse.shape[0] != fine.shape[0]:
        raise ValueError("fine grid must refine the coarse grid by an integer factor")
    shape = []
    for s in coarse.shape:
        shape += [s, f]
    avg = fine.reshape(shape).mean(axis=tuple(range(1, 2 * coarse.ndim, 2)))
    return float(np.mean((coarse > 0.5) != (avg > 0.5)))
