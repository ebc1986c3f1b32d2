"""Direction-finding subproblem over the unit simplex.

For weights lam on the simplex and s = U_N^T lam, the subproblem value is

    f(lam) = 1/2 sum_i ( phi(b_i - x_i) * max(0, -s_i)^2
                       + phi(x_i - a_i) * max(0,  s_i)^2 )

with gradient ``-U_N delta(lam)`` where ``delta_i`` weights the negative and
positive parts of s_i by the opposite-bound gaps.  The minimizing weights
produce the common descent direction ``d_N = delta(lam*)``: gap factors
vanish on active bounds, so the direction never pushes a variable outside
its box.  Optimality is certified through the inequality
``delta . u^j <= -2 f`` for every objective row, an exact characterization
of the minimizers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteEvaluation

_ARMIJO_C = 1e-4


@dataclass(frozen=True)
class PhiChoice:
    """Bound-gap weighting functional.

    ``power(p)`` is ``t^p / p`` with p in (0, 1]; p = 1 is the default and is
    the convergence-grade choice (continuous with finite one-sided slope at
    zero).  ``indicator`` (1 for t != 0, else 0) is provided for
    experimentation only.
    """

    kind: str
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "indicator"):
            raise ValueError(f"unknown phi kind {self.kind!r}")
        if self.kind == "power" and not (0.0 < self.p <= 1.0):
            raise ValueError("power exponent must lie in (0, 1]")

    @staticmethod
    def power(p=1.0):
        return PhiChoice("power", float(p))

    @staticmethod
    def indicator():
        return PhiChoice("indicator")


def phi_eval(choice: PhiChoice, t):
    """Evaluate the gap functional on nonnegative scalars or arrays."""
    t = np.asarray(t, dtype=float)
    if choice.kind == "power":
        out = np.abs(t) ** choice.p / choice.p
    else:
        out = (t != 0.0).astype(float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundGaps:
    """Distances of the nonbasic variables to their bounds (both >= 0)."""

    to_lower: np.ndarray
    to_upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "to_lower", np.asarray(self.to_lower, dtype=float))
        object.__setattr__(self, "to_upper", np.asarray(self.to_upper, dtype=float))
        if self.to_lower.shape != self.to_upper.shape:
            raise DimensionMismatch("gap vectors must share a shape")
        if np.any(self.to_lower < 0) or np.any(self.to_upper < 0):
            raise ValueError("bound gaps must be nonnegative")


def bound_gaps(x, lower, upper, nonbasic) -> BoundGaps:
    """Gaps of the nonbasic block; tiny negatives from roundoff clamp to 0."""
    x = np.asarray(x, dtype=float)
    ni = list(nonbasic)
    return BoundGaps(np.maximum(x[ni] - np.asarray(lower)[ni], 0.0),
                     np.maximum(np.asarray(upper)[ni] - x[ni], 0.0))


@dataclass(frozen=True)
class SimplexWeights:
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        if np.any(self.lam < 0) or abs(float(self.lam.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")


@dataclass(frozen=True)
class ReducedDirection:
    """Subproblem solution: weights, optimal value, and descent direction.

    ``certified`` records whether the optimality gap closed below tolerance;
    an uncertified direction is still the best iterate found.
    """

    weights: SimplexWeights
    value: float
    d_n: np.ndarray
    certified: bool = True


def _phi_pair(choice, gaps):
    return phi_eval(choice, gaps.to_lower), phi_eval(choice, gaps.to_upper)


def _parts(u_n, lam, phi_lo, phi_up):
    s = u_n.T @ lam
    pos = np.maximum(s, 0.0)
    neg = np.maximum(-s, 0.0)
    value = 0.5 * (float(phi_up @ neg**2) + float(phi_lo @ pos**2))
    delta = phi_up * neg - phi_lo * pos
    return value, delta


def subproblem_value(u_n, gaps: BoundGaps, lam: SimplexWeights, choice: PhiChoice) -> float:
    phi_lo, phi_up = _phi_pair(choice, gaps)
    value, _ = _parts(np.asarray(u_n, dtype=float), lam.lam, phi_lo, phi_up)
    return value


def delta_direction(u_n, gaps: BoundGaps, lam: SimplexWeights, choice: PhiChoice) -> np.ndarray:
    phi_lo, phi_up = _phi_pair(choice, gaps)
    _, delta = _parts(np.asarray(u_n, dtype=float), lam.lam, phi_lo, phi_up)
    return delta


def subproblem_gradient(u_n, gaps: BoundGaps, lam: SimplexWeights, choice: PhiChoice) -> np.ndarray:
    """Gradient of the subproblem objective in the weights: ``-U_N delta``."""
    u_n = np.asarray(u_n, dtype=float)
    return -(u_n @ delta_direction(u_n, gaps, lam, choice))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-based, exact)."""
    v = np.asarray(v, dtype=float)
    a = np.sort(v)[::-1]
    cums = (np.cumsum(a) - 1.0) / np.arange(1, v.size + 1)
    k = np.nonzero(a > cums)[0][-1]
    return np.maximum(v - cums[k], 0.0)


def solve_subproblem(u_n, gaps: BoundGaps, choice: PhiChoice, tol=1e-10,
                     max_iters=500, lam0=None) -> ReducedDirection:
    """Projected gradient with backtracking on the simplex.

    Stops when the optimality gap ``2 f + max_j delta . u^j`` falls below
    ``tol * max(1, f)``; at a minimizer the max equals exactly ``-2 f``, so
    the gap is a computable certificate.  On iteration exhaustion the best
    iterate is returned with ``certified=False``.
    """
    u_n = np.asarray(u_n, dtype=float)
    if not np.all(np.isfinite(u_n)):
        raise NonFiniteEvaluation("reduced Jacobian must be finite")
    r = u_n.shape[0]
    phi_lo, phi_up = _phi_pair(choice, gaps)

    if r == 1:
        lam = np.ones(1)
        value, delta = _parts(u_n, lam, phi_lo, phi_up)
        return ReducedDirection(SimplexWeights(lam), value, delta, True)

    lam = np.full(r, 1.0 / r) if lam0 is None else project_simplex(lam0)
    value, delta = _parts(u_n, lam, phi_lo, phi_up)
    step = 1.0
    iters = 0
    certified = False
    while True:
        rowdots = u_n @ delta
        gap = 2.0 * value + float(rowdots.max())
        if gap <= tol * max(1.0, value):
            certified = True
            break
        if iters >= max_iters:
            break
        iters += 1
        grad = -rowdots
        accepted = False
        for _ in range(60):
            cand = project_simplex(lam - step * grad)
            move = cand - lam
            if not move.any():
                break
            cand_value, cand_delta = _parts(u_n, cand, phi_lo, phi_up)
            if cand_value <= value + _ARMIJO_C * float(grad @ move):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # projection fixed point: gap test above is the verdict
        lam, value, delta = cand, cand_value, cand_delta
        step = min(step * 2.0, 1e12)
    return ReducedDirection(SimplexWeights(lam), value, delta, certified)
