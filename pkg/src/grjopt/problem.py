"""Problem model: vector objectives with equality constraints and box bounds.

The canonical form is ``min F(x)  s.t.  G(x) = 0,  a <= x <= b`` with F
mapping to R^r and G to R^m (m < n).  Inequality-constrained inputs are
converted by ``slackify``: each ``h_i(x) <= 0`` becomes ``h_i(x) + s_i = 0``
with a bounded nonnegative slack.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import reduction
from .errors import (
    NoFeasiblePointFound,
    NonFiniteEvaluation,
    NonPositiveSlackBound,
    OutOfBox,
)

FEASIBILITY_TOL = 1e-6


def _as_float_array(v):
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class MopProblem:
    """Evaluable multiobjective problem in canonical equality form.

    ``eval_f``/``eval_g`` map an n-vector to r- and m-vectors; ``jac_f`` and
    ``jac_g`` return the (r x n) and (m x n) Jacobians.  Evaluation callables
    must be pure; instances are immutable and safe to share across runs.
    ``start_hint`` optionally adjusts a raw box sample before restoration
    (used by slackified problems to warm-start slack values).
    """

    name: str
    n: int
    r: int
    m: int
    eval_f: Callable[[np.ndarray], np.ndarray]
    eval_g: Callable[[np.ndarray], np.ndarray]
    jac_f: Callable[[np.ndarray], np.ndarray]
    jac_g: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    start_hint: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_float_array(self.lower))
        object.__setattr__(self, "upper", _as_float_array(self.upper))
        if self.m >= self.n:
            raise ValueError(f"need m < n, got m={self.m}, n={self.n}")
        if self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValueError("bounds must be n-vectors")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if not np.all(self.lower < self.upper):
            raise ValueError("need a_i < b_i for every variable")

    def box_tolerance(self):
        """Componentwise slack used when testing box membership."""
        return 1e-12 * np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))


@dataclass(frozen=True)
class RawProblem:
    """Ingestion form allowing inequalities ``h(x) <= 0`` next to equalities.

    ``slack_upper`` may carry per-constraint slack bounds chosen so the
    slack box never cuts the feasible set (any value above sup(-h_i) works).
    """

    name: str
    n: int
    r: int
    eval_f: Callable[[np.ndarray], np.ndarray]
    jac_f: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    n_eq: int = 0
    eval_eq: Optional[Callable] = None
    jac_eq: Optional[Callable] = None
    n_ineq: int = 0
    eval_ineq: Optional[Callable] = None
    jac_ineq: Optional[Callable] = None
    slack_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_float_array(self.lower))
        object.__setattr__(self, "upper", _as_float_array(self.upper))
        if self.slack_upper is not None:
            object.__setattr__(self, "slack_upper", _as_float_array(self.slack_upper))


@dataclass(frozen=True)
class FeasiblePoint:
    """A box point with equality residual below the feasibility tolerance."""

    x: np.ndarray
    constraint_residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", _as_float_array(self.x))


def slackify(raw: RawProblem, slack_upper=1e6) -> MopProblem:
    """Convert inequalities to bounded-slack equalities.

    The result has ``n + q`` variables and ``e + q`` equalities; objectives
    ignore the slack block and the new equality Jacobian is ``[Jh | I_q]``.
    Per-problem ``raw.slack_upper`` overrides the scalar default.
    """
    e, q, n = raw.n_eq, raw.n_ineq, raw.n
    if q == 0:
        eval_g = raw.eval_eq if e else (lambda x: np.empty(0))
        jac_g = raw.jac_eq if e else (lambda x: np.empty((0, n)))
        return MopProblem(raw.name, n, raw.r, e, raw.eval_f, eval_g,
                          raw.jac_f, jac_g, raw.lower, raw.upper)

    su = raw.slack_upper if raw.slack_upper is not None else np.full(q, float(slack_upper))
    su = np.broadcast_to(np.asarray(su, dtype=float), (q,)).copy()
    if np.any(su <= 0):
        raise NonPositiveSlackBound("slack upper bounds must be positive")

    lower = np.concatenate([raw.lower, np.zeros(q)])
    upper = np.concatenate([raw.upper, su])
    eye_q = np.eye(q)

    def eval_f(z):
        return raw.eval_f(z[:n])

    def jac_f(z):
        out = np.zeros((raw.r, n + q))
        out[:, :n] = raw.jac_f(z[:n])
        return out

    if e:
        def eval_g(z):
            x, s = z[:n], z[n:]
            return np.concatenate([raw.eval_eq(x), raw.eval_ineq(x) + s])

        def jac_g(z):
            x = z[:n]
            out = np.zeros((e + q, n + q))
            out[:e, :n] = raw.jac_eq(x)
            out[e:, :n] = raw.jac_ineq(x)
            out[e:, n:] = eye_q
            return out
    else:
        def eval_g(z):
            return raw.eval_ineq(z[:n]) + z[n:]

        def jac_g(z):
            out = np.zeros((q, n + q))
            out[:, :n] = raw.jac_ineq(z[:n])
            out[:, n:] = eye_q
            return out

    def start_hint(z):
        # Exact slack when h(x) <= 0, clamped into the slack box otherwise.
        z = z.copy()
        h = raw.eval_ineq(z[:n])
        z[n:] = np.clip(-h, 0.0, su)
        return z

    return MopProblem(raw.name, n + q, raw.r, e + q, eval_f, eval_g,
                      jac_f, jac_g, lower, upper, start_hint=start_hint)


def evaluate(p: MopProblem, x):
    """Checked evaluation returning ``(F(x), G(x))``.

    Raises OutOfBox when x leaves the box by more than a scale-aware 1e-12
    slack, and NonFiniteEvaluation when either map returns non-finite values.
    """
    x = _as_float_array(x)
    tol = p.box_tolerance()
    if np.any(x < p.lower - tol) or np.any(x > p.upper + tol):
        raise OutOfBox(f"point outside the box for problem {p.name!r}")
    fv = np.asarray(p.eval_f(x), dtype=float)
    gv = np.asarray(p.eval_g(x), dtype=float) if p.m else np.empty(0)
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise NonFiniteEvaluation(f"non-finite evaluation for problem {p.name!r}")
    return fv, gv


def feasible_start(p: MopProblem, seed, max_attempts=500, eps=FEASIBILITY_TOL,
                   max_newton=200, margin_tol=1e-8) -> FeasiblePoint:
    """Sample the box until Newton restoration lands a feasible point.

    Deterministic per seed: draws uniform box samples, applies the problem's
    start hint, restores the basic block of a freshly selected basis, and
    accepts the first in-box point with ``||G||_inf <= eps``.
    """
    rng = np.random.default_rng(seed)
    width = p.upper - p.lower
    for _ in range(max_attempts):
        z = p.lower + rng.random(p.n) * width
        if p.start_hint is not None:
            z = p.start_hint(z)
        if p.m == 0:
            return FeasiblePoint(z, 0.0)
        try:
            gv = np.asarray(p.eval_g(z), dtype=float)
            if not np.all(np.isfinite(gv)):
                continue
            if np.max(np.abs(gv)) <= eps:
                return FeasiblePoint(z, float(np.max(np.abs(gv))))
            part = reduction.select_basis(p, z, margin_tol)
            xb, xn = reduction.split(part, z)
            yb = reduction.restore_basics(p, part, xb, xn, eps=eps, max_newton=max_newton)
            cand = reduction.compose(part, yb, xn)
        except Exception:
            continue
        tol = p.box_tolerance()
        if np.any(cand < p.lower - tol) or np.any(cand > p.upper + tol):
            continue
        cand = np.clip(cand, p.lower, p.upper)
        gv = np.asarray(p.eval_g(cand), dtype=float)
        if np.all(np.isfinite(gv)) and np.max(np.abs(gv)) <= eps:
            return FeasiblePoint(cand, float(np.max(np.abs(gv))))
    raise NoFeasiblePointFound(f"no feasible point for {p.name!r} in {max_attempts} attempts")
