"""Maximal feasible step and the feasible Armijo search.

The nonbasic update ``x_N + t d_N`` is linear, so the largest box-feasible
step has a closed form.  The search starts there, Newton-restores the basic
block, and accepts the first restored point that is feasible, in box, and
satisfies the componentwise strict Armijo inequality across all objectives;
on failure the step halves and restoration restarts from the incumbent
basic values.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics, reduction
from .errors import LineSearchFailed, SingularMatrix, ZeroDirection
from .problem import FeasiblePoint


@dataclass(frozen=True)
class StepResult:
    t: float
    x_new: FeasiblePoint
    newton_iters: int
    halvings: int


def max_feasible_step(xn, d_n, lower_n, upper_n) -> float:
    """Largest t with ``lower_n <= xn + t d_n <= upper_n``.

    Requires a direction honoring active-bound signs (components pointing
    out of an active bound are zero there), which makes the result positive.
    """
    xn = np.asarray(xn, dtype=float)
    d = np.asarray(d_n, dtype=float)
    if not d.any():
        raise ZeroDirection("direction is identically zero")
    ratios = []
    neg = d < 0
    pos = d > 0
    if neg.any():
        ratios.append(np.min((np.asarray(lower_n)[neg] - xn[neg]) / d[neg]))
    if pos.any():
        ratios.append(np.min((np.asarray(upper_n)[pos] - xn[pos]) / d[pos]))
    return float(min(ratios))


def _clip_to_box(v, lo, hi, guard=1e-9):
    # Only roundoff-scale overshoot is tolerated; anything larger is a bug.
    v = np.asarray(v, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    if np.any(v < lo - guard * scale) or np.any(v > hi + guard * scale):
        raise LineSearchFailed("trial point escaped the box beyond roundoff")
    return np.clip(v, lo, hi)


def armijo_search(p, x, part, state, direction, beta=0.25, eps=1e-6,
                  max_newton=200, max_halvings=60) -> StepResult:
    """Feasible Armijo search with Newton restoration.

    Scans ``t = t_N, t_N/2, ...``; for each t, Newton steps the basic block
    (warm-started from the incumbent basics) and after every update tests
    the constraint residual, the basic box bounds, and the strict vector
    Armijo inequality ``F(trial) < F(x) + beta t U_N d_N``.  The first trial
    passing all three is returned.
    """
    x = np.asarray(x.x if isinstance(x, FeasiblePoint) else x, dtype=float)
    bi, ni = list(part.basic), list(part.nonbasic)
    lo_n, hi_n = p.lower[ni], p.upper[ni]
    lo_b, hi_b = p.lower[bi], p.upper[bi]
    xb, xn = reduction.split(part, x)
    d_n = np.asarray(direction.d_n, dtype=float)
    f0 = np.asarray(p.eval_f(x), dtype=float)
    slope = state.u_n @ d_n  # per-objective directional derivative U_N d_N

    t = max_feasible_step(xn, d_n, lo_n, hi_n)
    newton_total = 0
    for halvings in range(max_halvings + 1):
        xn_t = _clip_to_box(xn + t * d_n, lo_n, hi_n)
        y = xb.copy()
        gv = _eval_g_safe(p, part, y, xn_t)
        if gv is None:
            t *= 0.5
            continue
        for _ in range(max_newton):
            a = np.asarray(p.jac_g(reduction.compose(part, y, xn_t)), dtype=float)
            try:
                fac = numerics.lu_factor(a[:, bi]) if bi else None
            except SingularMatrix:
                break
            y = y - numerics.lu_solve(fac, gv) if bi else y
            newton_total += 1
            if not np.all(np.isfinite(y)):
                break
            gv = _eval_g_safe(p, part, y, xn_t)
            if gv is None:
                break
            resid = float(np.max(np.abs(gv))) if gv.size else 0.0
            if resid < eps:
                trial = reduction.compose(part, y, xn_t)
                if np.all(lo_b <= y) and np.all(y <= hi_b):
                    fv = np.asarray(p.eval_f(trial), dtype=float)
                    if np.all(np.isfinite(fv)) and np.all(fv < f0 + beta * t * slope):
                        return StepResult(t, FeasiblePoint(trial, resid),
                                          newton_total, halvings)
                break  # restored but failed a test: rerunning Newton cannot fix it
        t *= 0.5
    raise LineSearchFailed(f"no acceptable step within {max_halvings} halvings")


def _eval_g_safe(p, part, y, xn_t):
    if not part.basic and p.m == 0:
        return np.empty(0)
    gv = np.asarray(p.eval_g(reduction.compose(part, y, xn_t)), dtype=float)
    return gv if np.all(np.isfinite(gv)) else None
