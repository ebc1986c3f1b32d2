"""Dense linear-algebra kernel and finite-difference oracles.

Matrices are plain float64 numpy arrays in row-major order.  The LU wrapper
keeps the packed factors and the row permutation so basic-block systems are
solved repeatedly without ever forming an explicit inverse.  Problem sizes
stay small (tens of variables), so everything is dense.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonFiniteEvaluation, SingularMatrix

# A pivot below this magnitude marks the matrix as numerically singular, so a
# near-degenerate basic block is detected instead of amplifying noise.
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class LuFactorization:
    """Packed LU factors of a square matrix with partial (row) pivoting.

    ``factors`` stores the strict lower triangle of L (unit diagonal implied)
    and the upper triangle of U in one array.  ``pivot`` is the row
    permutation: row ``i`` of ``L @ U`` reconstructs row ``pivot[i]`` of the
    input.  ``sign`` is the parity of that permutation.
    """

    factors: np.ndarray
    pivot: np.ndarray
    sign: int
    # LAPACK swap-index form consumed by the triangular solver.
    swaps: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.factors.shape[0]


def lu_factor(m) -> LuFactorization:
    """Factor a square matrix, raising SingularMatrix on tiny pivots."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise NonFiniteEvaluation("matrix entries must be finite")
    if a.shape[0] == 0:
        return LuFactorization(a.copy(), np.empty(0, dtype=int), 1, np.empty(0, dtype=np.int32))
    with warnings.catch_warnings():
        # scipy warns about exact zero pivots; the threshold below raises.
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    small = np.min(np.abs(np.diag(lu)))
    if small < PIVOT_TOL:
        raise SingularMatrix(f"pivot magnitude {small:.3e} below {PIVOT_TOL:.0e}")
    perm = np.arange(a.shape[0])
    sign = 1
    for i, p in enumerate(piv):
        if p != i:
            perm[[i, p]] = perm[[p, i]]
            sign = -sign
    return LuFactorization(lu, perm, sign, piv)


def lu_solve(f: LuFactorization, rhs, transpose=False) -> np.ndarray:
    """Solve ``A x = rhs`` (or ``A^T x = rhs``) from a factorization of A."""
    b = np.asarray(rhs, dtype=float)
    if b.ndim not in (1, 2) or b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs shape {b.shape} incompatible with {f.n}x{f.n} system")
    if f.n == 0:
        return b.copy()
    return scipy.linalg.lu_solve((f.factors, f.swaps), b, trans=1 if transpose else 0, check_finite=False)


def finite_diff_jacobian(fn, x, h=1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector map at ``x``.

    Entry (j, i) is ``(fn(x + h e_i)[j] - fn(x - h e_i)[j]) / (2 h)``.  Used
    as the independent oracle for analytic Jacobians and reduced gradients.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise NonFiniteEvaluation("map returned non-finite values")
    jac = np.empty((f0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = np.atleast_1d(np.asarray(fn(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(xm), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluation("map returned non-finite values")
        jac[:, i] = (fp - fm) / (2.0 * h)
    return jac
