"""Outer descent loop, KKT certification, and population driving.

Each iteration selects (or keeps) a nondegenerate basis, builds the reduced
Jacobian, solves the simplex direction subproblem, and either stops — the
subproblem value is the stationarity measure — or takes a feasible Armijo
step.  A stop emits Lagrange multipliers assembled from the subproblem
weights: the construction zeroes stationarity identically, so the
complementarity residual is the informative part of the certificate.
"""

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import direction as _dir
from . import linesearch, numerics, reduction
from .errors import (
    DimensionMismatch,
    GrjoptError,
    LineSearchFailed,
    NoNondegenerateBasis,
    RankDeficientJacobian,
    SingularBasis,
)
from .problem import FeasiblePoint, MopProblem, feasible_start

# Tolerance used when certifying the weights behind an emitted certificate;
# the in-loop subproblem tolerance only needs to support the stopping rule.
_POLISH_TOL = 1e-14
_POLISH_ITERS = 5000


class SolveStatus(enum.Enum):
    KKT_STATIONARY = "KktStationary"
    MAX_OUTER_REACHED = "MaxOuterReached"
    LINE_SEARCH_FAILED = "LineSearchFailed"
    BASIS_FAILURE = "BasisFailure"


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.25
    phi: _dir.PhiChoice = field(default_factory=_dir.PhiChoice.power)
    stop_tol: float = 1e-6
    max_outer: int = 500
    eps: float = 1e-6
    newton_cap: int = 200
    margin_tol: float = 1e-8
    subproblem_tol: float = 1e-12
    subproblem_iters: int = 1000
    max_halvings: int = 60
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        for name in ("stop_tol", "eps", "margin_tol", "subproblem_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class KktCertificate:
    """Multipliers (lam, u, v, w) with stationarity and complementarity residuals."""

    lam: _dir.SimplexWeights
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    stationarity_residual: float
    complementarity_residual: float


@dataclass(frozen=True)
class IterationRecord:
    k: int
    x: np.ndarray
    f: np.ndarray
    value: float
    certified: bool
    basis: tuple
    t: Optional[float] = None
    halvings: int = 0
    newton_iters: int = 0
    reselected: bool = False


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    x_final: np.ndarray
    f_final: np.ndarray
    trace: tuple
    certificate: Optional[KktCertificate] = None
    message: str = ""

    @property
    def outer_iterations(self):
        return len(self.trace) - 1

    @property
    def final_value(self):
        return self.trace[-1].value if self.trace else float("nan")


def kkt_certificate(p: MopProblem, x, part, state, lam: _dir.SimplexWeights) -> KktCertificate:
    """Assemble multipliers from the subproblem weights at a point.

    ``u = -A_B^{-T} JF_B^T lam`` cancels the basic block exactly, and the
    positive/negative parts of ``U_N^T lam`` become the bound multipliers on
    the nonbasic block, so the stationarity residual is roundoff-level by
    construction; complementarity measures how stationary the point truly is.
    """
    x = np.asarray(x, dtype=float)
    jf = np.asarray(p.jac_f(x), dtype=float)
    bi, ni = list(part.basic), list(part.nonbasic)
    lamv = lam.lam
    if bi:
        rhs = jf[:, bi].T @ lamv
        u = -numerics.lu_solve(state.ab_factor, rhs, transpose=True)
    else:
        u = np.empty(0)
    s = state.u_n.T @ lamv
    v = np.zeros(p.n)
    w = np.zeros(p.n)
    v[ni] = np.maximum(s, 0.0)
    w[ni] = np.maximum(-s, 0.0)
    resid = jf.T @ lamv - v + w
    if bi:
        resid = resid + np.asarray(p.jac_g(x), dtype=float).T @ u
    stat = float(np.max(np.abs(resid)))
    compl = max(abs(float(v @ (x - p.lower))), abs(float(w @ (p.upper - x))))
    return KktCertificate(lam, u, v, w, stat, compl)


def _record(k, x, fv, red, part, **kw):
    return IterationRecord(k, x.copy(), np.asarray(fv, dtype=float).copy(),
                           float(red.value), bool(red.certified), part.basic, **kw)


def grj_solve(p: MopProblem, x0, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Run the reduced-Jacobian descent loop from one feasible start."""
    x = np.asarray(x0.x if isinstance(x0, FeasiblePoint) else x0, dtype=float).copy()
    trace = []

    def finish(status, cert=None, msg=""):
        return SolveResult(status, x.copy(), np.asarray(p.eval_f(x), dtype=float),
                           tuple(trace), cert, msg)

    try:
        part = reduction.select_basis(p, x, cfg.margin_tol)
    except (NoNondegenerateBasis, RankDeficientJacobian) as exc:
        return finish(SolveStatus.BASIS_FAILURE, msg=str(exc))

    reselected_here = False
    reselect_flag = False
    for k in range(cfg.max_outer):
        try:
            state = reduction.reduced_jacobian(p, x, part)
        except SingularBasis as exc:
            if reselected_here:
                return finish(SolveStatus.BASIS_FAILURE, msg=str(exc))
            try:
                part = reduction.select_basis(p, x, cfg.margin_tol)
            except (NoNondegenerateBasis, RankDeficientJacobian) as exc2:
                return finish(SolveStatus.BASIS_FAILURE, msg=str(exc2))
            reselected_here = True
            state = reduction.reduced_jacobian(p, x, part)
        gaps = _dir.bound_gaps(x, p.lower, p.upper, part.nonbasic)
        red = _dir.solve_subproblem(state.u_n, gaps, cfg.phi,
                                    cfg.subproblem_tol, cfg.subproblem_iters)
        fv = p.eval_f(x)
        if red.value < cfg.stop_tol:
            trace.append(_record(k, x, fv, red, part, reselected=reselect_flag))
            polished = _dir.solve_subproblem(state.u_n, gaps, cfg.phi, _POLISH_TOL,
                                             _POLISH_ITERS, lam0=red.weights.lam)
            cert = kkt_certificate(p, x, part, state, polished.weights)
            return finish(SolveStatus.KKT_STATIONARY, cert)
        try:
            step = linesearch.armijo_search(p, x, part, state, red, beta=cfg.beta,
                                            eps=cfg.eps, max_newton=cfg.newton_cap,
                                            max_halvings=cfg.max_halvings)
        except LineSearchFailed as exc:
            if reselected_here:
                trace.append(_record(k, x, fv, red, part, reselected=reselect_flag))
                return finish(SolveStatus.LINE_SEARCH_FAILED, msg=str(exc))
            try:
                part = reduction.select_basis(p, x, cfg.margin_tol)
            except (NoNondegenerateBasis, RankDeficientJacobian) as exc2:
                trace.append(_record(k, x, fv, red, part, reselected=reselect_flag))
                return finish(SolveStatus.BASIS_FAILURE, msg=str(exc2))
            reselected_here = True
            reselect_flag = True
            continue
        trace.append(_record(k, x, fv, red, part, t=step.t, halvings=step.halvings,
                             newton_iters=step.newton_iters, reselected=reselect_flag))
        x = step.x_new.x
        reselected_here = False
        reselect_flag = False
        margins = reduction.interiority_margins(x, p.lower, p.upper)
        if part.basic and min(margins[list(part.basic)]) <= cfg.margin_tol:
            try:
                part = reduction.select_basis(p, x, cfg.margin_tol)
                reselect_flag = True
            except (NoNondegenerateBasis, RankDeficientJacobian) as exc:
                red_t = _dir.solve_subproblem(
                    reduction.reduced_jacobian(p, x, part).u_n
                    if _basis_still_factors(p, x, part) else state.u_n,
                    _dir.bound_gaps(x, p.lower, p.upper, part.nonbasic),
                    cfg.phi, cfg.subproblem_tol, cfg.subproblem_iters)
                trace.append(_record(k + 1, x, p.eval_f(x), red_t, part))
                return finish(SolveStatus.BASIS_FAILURE, msg=str(exc))

    state = None
    try:
        state = reduction.reduced_jacobian(p, x, part)
        gaps = _dir.bound_gaps(x, p.lower, p.upper, part.nonbasic)
        red = _dir.solve_subproblem(state.u_n, gaps, cfg.phi,
                                    cfg.subproblem_tol, cfg.subproblem_iters)
        trace.append(_record(cfg.max_outer, x, p.eval_f(x), red, part))
    except GrjoptError:
        pass
    return finish(SolveStatus.MAX_OUTER_REACHED)


def _basis_still_factors(p, x, part):
    if not part.basic:
        return True
    try:
        numerics.lu_factor(np.asarray(p.jac_g(x), dtype=float)[:, list(part.basic)])
        return True
    except GrjoptError:
        return False


def nondominated_filter(points, mode="weak"):
    """Drop every point dominated by some input point.

    ``weak`` removes y when some z satisfies z <= y with at least one strict
    coordinate (duplicates survive); ``strict`` removes y only when some z is
    strictly better in every coordinate.  Kept points preserve input order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 0 if pts.ndim < 2 else pts.shape[1])
    if pts.ndim != 2:
        raise DimensionMismatch("expected a 2-D array of objective vectors")
    if mode not in ("weak", "strict"):
        raise ValueError(f"unknown dominance mode {mode!r}")
    keep = _nondominated_mask(pts, mode)
    return pts[keep]


def _nondominated_mask(pts, mode):
    n, r = pts.shape
    if r == 2:
        return _mask_2d(pts, mode)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(pts <= pts[i], axis=1)
        lt = np.any(pts < pts[i], axis=1)
        if mode == "weak":
            dom = le & lt
        else:
            dom = np.all(pts < pts[i], axis=1)
        dom[i] = False
        if dom.any():
            keep[i] = False
    return keep


def _mask_2d(pts, mode):
    n = pts.shape[0]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    keep = np.ones(n, dtype=bool)
    best_before = np.inf  # min f2 over strictly smaller f1
    i = 0
    while i < n:
        j = i
        while j < n and pts[order[j], 0] == pts[order[i], 0]:
            j += 1
        group = order[i:j]
        gmin = float(np.min(pts[group, 1]))
        for idx in group:
            y2 = pts[idx, 1]
            if mode == "weak":
                dominated = best_before <= y2 or gmin < y2
            else:
                dominated = best_before < y2
            if dominated:
                keep[idx] = False
        best_before = min(best_before, gmin)
        i = j
    return keep


@dataclass(frozen=True)
class PopulationResult:
    """Outcome of a multi-start batch plus the nondominated archive."""

    results: tuple
    start_errors: tuple
    archive_f: np.ndarray
    archive_x: np.ndarray
    seconds: tuple

    def status_counts(self):
        counts = {}
        for res, err in zip(self.results, self.start_errors):
            key = res.status.value if res is not None else "StartFailed"
            counts[key] = counts.get(key, 0) + 1
        return counts


def solve_population(p: MopProblem, n_starts: int, cfg: SolverConfig = SolverConfig(),
                     jobs: int = 1, problem_factory=None) -> PopulationResult:
    """Solve from deterministic seeded starts and archive the nondominated set.

    Child seeds spawn from ``cfg.seed`` so batches are reproducible; per-start
    failures are recorded without aborting the batch.  With ``jobs > 1`` a
    picklable ``problem_factory`` rebuilds the problem in worker processes
    and results merge in start order, keeping output deterministic.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(n_starts)]
    if jobs > 1 and problem_factory is not None:
        import concurrent.futures as cf

        args = [(problem_factory, s, cfg) for s in seeds]
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_one_pickled, args, chunksize=max(1, n_starts // (4 * jobs))))
    else:
        rows = [_solve_one(p, s, cfg) for s in seeds]

    results = tuple(r[0] for r in rows)
    errors = tuple(r[1] for r in rows)
    seconds = tuple(r[2] for r in rows)
    term_f = [r.f_final for r in results if r is not None]
    term_x = [r.x_final for r in results if r is not None]
    if term_f:
        fs = np.asarray(term_f)
        xs = np.asarray(term_x)
        keep = _nondominated_mask(fs, "weak")
        fs, xs = fs[keep], xs[keep]
        fs, xs = _collapse_duplicates(fs, xs, tol=1e-8)
        order = np.lexsort(tuple(fs[:, c] for c in range(fs.shape[1] - 1, -1, -1)))
        fs, xs = fs[order], xs[order]
    else:
        fs = np.empty((0, p.r))
        xs = np.empty((0, p.n))
    return PopulationResult(results, errors, fs, xs, seconds)


def _collapse_duplicates(fs, xs, tol):
    keep = []
    for i in range(fs.shape[0]):
        if all(np.max(np.abs(fs[i] - fs[j])) > tol for j in keep):
            keep.append(i)
    return fs[keep], xs[keep]


def _solve_one(p, seed, cfg):
    tic = time.perf_counter()
    try:
        start = feasible_start(p, seed, eps=cfg.eps, max_newton=cfg.newton_cap,
                               margin_tol=cfg.margin_tol)
    except GrjoptError as exc:
        return None, f"{type(exc).__name__}: {exc}", time.perf_counter() - tic
    res = grj_solve(p, start, cfg)
    return res, None, time.perf_counter() - tic


def _solve_one_pickled(args):
    factory, seed, cfg = args
    return _solve_one(factory(), seed, cfg)
