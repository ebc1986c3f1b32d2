"""Basis selection, reduced Jacobian, and Newton restoration.

Splitting ``x = (x_B, x_N)`` along an invertible column block ``A_B`` of the
constraint Jacobian lets the equality manifold be parameterized by the
nonbasic variables alone; Newton iteration on the basic block realizes that
implicit map numerically.  The reduced Jacobian
``U_N = JF_N - JF_B A_B^{-1} A_N`` is the derivative of the objectives along
the manifold and everything downstream (direction finding, line search,
certificates) consumes it.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics
from .errors import (
    NewtonDiverged,
    NoNondegenerateBasis,
    RankDeficientJacobian,
    SingularBasis,
    SingularMatrix,
)


@dataclass(frozen=True)
class BasisPartition:
    """Disjoint basic/nonbasic index split (0-based, each sorted ascending)."""

    basic: tuple
    nonbasic: tuple

    def __post_init__(self):
        object.__setattr__(self, "basic", tuple(int(i) for i in self.basic))
        object.__setattr__(self, "nonbasic", tuple(int(i) for i in self.nonbasic))


@dataclass(frozen=True)
class ReducedState:
    """Factorized basic block plus the reduced Jacobian at one point."""

    partition: BasisPartition
    ab_factor: Optional[numerics.LuFactorization]
    u_n: np.ndarray


def split(part: BasisPartition, x):
    x = np.asarray(x, dtype=float)
    return x[list(part.basic)], x[list(part.nonbasic)]


def compose(part: BasisPartition, xb, xn):
    x = np.empty(len(part.basic) + len(part.nonbasic))
    x[list(part.basic)] = xb
    x[list(part.nonbasic)] = xn
    return x


def interiority_margins(x, lower, upper):
    """min(x_i - a_i, b_i - x_i) per component; zero on active bounds."""
    x = np.asarray(x, dtype=float)
    return np.minimum(x - lower, upper - x)


def select_basis(p, x, margin_tol=1e-8) -> BasisPartition:
    """Greedy max-margin basis with rank screening.

    Columns are considered in decreasing order of interiority margin (ties
    broken by index) and accepted only while they keep the growing block
    numerically independent, so basics stay strictly inside their bounds.
    """
    x = np.asarray(x, dtype=float)
    m, n = p.m, p.n
    if m == 0:
        return BasisPartition((), tuple(range(n)))
    a = np.asarray(p.jac_g(x), dtype=float)
    if a.shape != (m, n):
        raise RankDeficientJacobian(f"jac_g returned shape {a.shape}, expected {(m, n)}")
    margins = interiority_margins(x, p.lower, p.upper)
    order = np.lexsort((np.arange(n), -margins))
    scale = max(float(np.max(np.linalg.norm(a, axis=0))), 1.0)
    rank_tol = 1e-10 * scale

    chosen = []
    q = np.empty((m, 0))
    for idx in order:
        if margins[idx] <= margin_tol:
            break  # ordering makes every later margin at least as small
        col = a[:, idx].astype(float)
        resid = col - q @ (q.T @ col)
        resid = resid - q @ (q.T @ resid)  # reorthogonalize once
        norm = np.linalg.norm(resid)
        if norm <= rank_tol:
            continue
        chosen.append(int(idx))
        q = np.hstack([q, (resid / norm)[:, None]])
        if len(chosen) == m:
            break
    if len(chosen) < m:
        if np.linalg.matrix_rank(a) < m:
            raise RankDeficientJacobian(f"constraint Jacobian rank below {m} at the point")
        raise NoNondegenerateBasis(
            f"no nondegenerate basis for {p.name!r}: {len(chosen)} of {m} interior columns independent")
    basic = tuple(sorted(chosen))
    nonbasic = tuple(i for i in range(n) if i not in set(basic))
    return BasisPartition(basic, nonbasic)


def reduced_jacobian(p, x, part: BasisPartition) -> ReducedState:
    """Assemble ``U_N = JF_N - JF_B A_B^{-1} A_N`` via triangular solves."""
    x = np.asarray(x, dtype=float)
    jf = np.asarray(p.jac_f(x), dtype=float)
    bi, ni = list(part.basic), list(part.nonbasic)
    if not bi:
        return ReducedState(part, None, jf.copy())
    a = np.asarray(p.jac_g(x), dtype=float)
    try:
        fac = numerics.lu_factor(a[:, bi])
    except SingularMatrix as exc:
        raise SingularBasis(str(exc)) from exc
    y = numerics.lu_solve(fac, a[:, ni])  # A_B^{-1} A_N, never the inverse itself
    u_n = jf[:, ni] - jf[:, bi] @ y
    return ReducedState(part, fac, u_n)


def restore_basics(p, part: BasisPartition, xb_init, xn, eps=1e-6, max_newton=200):
    """Newton-iterate the basic block until ``||G||_inf < eps``.

    Refactorizes the basic block at every step (the constraint Jacobian is
    exact and m is small).  Raises NewtonDiverged when the cap is hit or the
    iteration produces non-finite values; SingularBasis when a step's basic
    block cannot be factored.
    """
    bi = list(part.basic)
    if not bi:
        return np.empty(0)
    y = np.asarray(xb_init, dtype=float).copy()
    xn = np.asarray(xn, dtype=float)
    gv = np.asarray(p.eval_g(compose(part, y, xn)), dtype=float)
    if not np.all(np.isfinite(gv)):
        raise NewtonDiverged("non-finite constraint values at the warm start")
    if np.max(np.abs(gv)) < eps:
        return y
    for _ in range(max_newton):
        a = np.asarray(p.jac_g(compose(part, y, xn)), dtype=float)
        try:
            fac = numerics.lu_factor(a[:, bi])
        except SingularMatrix as exc:
            raise SingularBasis(str(exc)) from exc
        y = y - numerics.lu_solve(fac, gv)
        if not np.all(np.isfinite(y)):
            raise NewtonDiverged("non-finite Newton iterate")
        gv = np.asarray(p.eval_g(compose(part, y, xn)), dtype=float)
        if not np.all(np.isfinite(gv)):
            raise NewtonDiverged("non-finite constraint values along the iteration")
        if np.max(np.abs(gv)) < eps:
            return y
    raise NewtonDiverged(f"residual {np.max(np.abs(gv)):.3e} after {max_newton} Newton steps")
