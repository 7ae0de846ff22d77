"""Symmetric cyclic tridiagonal systems with a dominance certificate.

The Newton and sensitivity systems of this package are tridiagonal with an
extra symmetric corner pair coupling the first and last unknowns.  Systems
of size 4 and up are solved by a rank-one corner correction of a banded
factorization; tiny systems go dense.  For row-diagonally-dominant
matrices the classical bound ||A^-1||_inf <= 1/h certifies the solution,
with h the minimal dominance gap.
"""

import numpy as np
from scipy.linalg import solve_banded

from .errors import DominanceError, NumericalError


class CyclicTridiagonal:
    """Symmetric cyclic tridiagonal matrix.

    ``off[j]`` couples indices j-1 and j, so ``off[0]`` is the corner
    entry between the last and first index.  For n = 2 both couplings
    address the same pair and their values add.
    """

    def __init__(self, diag, off):
        self.diag = np.asarray(diag, dtype=float)
        self.off = np.asarray(off, dtype=float)
        if self.diag.ndim != 1 or self.diag.shape != self.off.shape:
            raise ValueError("diag and off must be 1-d arrays of equal length")
        if self.diag.size < 2:
            raise ValueError("cyclic tridiagonal systems start at n = 2")

    @property
    def n(self):
        return self.diag.size

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        return (self.diag * x + self.off * np.roll(x, 1)
                + np.roll(self.off, -1) * np.roll(x, -1))

    def to_dense(self):
        n = self.n
        dense = np.diag(self.diag).astype(float)
        for j in range(n):
            dense[j, j - 1] += self.off[j]
            dense[j - 1, j] += self.off[j]
        return dense

    def dominance_margin(self):
        """min over rows of |diag| minus the row's off-diagonal mass."""
        return float(np.min(np.abs(self.diag) - np.abs(self.off)
                            - np.abs(np.roll(self.off, -1))))

    def is_dominant(self):
        return self.dominance_margin() > 0.0

    def _solve_corner_corrected(self, b):
        # Sherman-Morrison: write the matrix as T + u v^T with T strictly
        # tridiagonal, u = (g, 0, .., 0, c), v = (1, 0, .., 0, c/g)
        n = self.n
        c = self.off[0]
        g = -self.diag[0]
        if g == 0.0:
            raise NumericalError("zero leading diagonal entry")
        tdiag = self.diag.copy()
        tdiag[0] -= g
        tdiag[-1] -= c * c / g
        sup = self.off[1:]
        ab = np.zeros((3, n))
        ab[0, 1:] = sup
        ab[1, :] = tdiag
        ab[2, :-1] = sup
        rhs = np.column_stack([np.asarray(b, dtype=float), np.zeros(n)])
        rhs[0, 1] = g
        rhs[-1, 1] = c
        sol = solve_banded((1, 1), ab, rhs)
        y, z = sol[:, 0], sol[:, 1]
        vy = y[0] + (c / g) * y[-1]
        vz = z[0] + (c / g) * z[-1]
        denom = 1.0 + vz
        if denom == 0.0:
            raise NumericalError("singular corner correction")
        return y - z * (vy / denom)

    def solve(self, b, residual_tol=1e-12):
        """Solve self @ x = b to residual <= residual_tol * ||b||_inf."""
        b = np.asarray(b, dtype=float)
        if b.shape != self.diag.shape:
            raise ValueError("rhs shape mismatch")
        if self.n <= 3:
            x = np.linalg.solve(self.to_dense(), b)
        else:
            try:
                x = self._solve_corner_corrected(b)
                scale = max(float(np.max(np.abs(b))), 1e-300)
                resid = b - self.matvec(x)
                if np.max(np.abs(resid)) > residual_tol * scale:
                    x = x + self._solve_corner_corrected(resid)
                    resid = b - self.matvec(x)
                if np.max(np.abs(resid)) > residual_tol * scale:
                    x = np.linalg.solve(self.to_dense(), b)
            except (NumericalError, np.linalg.LinAlgError):
                x = np.linalg.solve(self.to_dense(), b)
        scale = max(float(np.max(np.abs(b))), 1e-300)
        if np.max(np.abs(b - self.matvec(x))) > residual_tol * scale:
            raise NumericalError("cyclic tridiagonal solve failed the residual check")
        return x


def cyclic_tridiag_solve(matrix, b):
    """Solve matrix @ x = b, requiring strict diagonal dominance.

    The dominance requirement is a validity certificate: these systems
    arise from well-separated convex billiards, where dominance holds by
    construction.  A violation signals an invalid configuration upstream.
    """
    if matrix.dominance_margin() <= 0.0:
        raise DominanceError(
            f"system is not strictly diagonally dominant "
            f"(margin {matrix.dominance_margin():.3e})")
    return matrix.solve(b)


def varah_bound(matrix):
    """Upper bound on ||matrix^-1||_inf from the dominance gap."""
    h = matrix.dominance_margin()
    if h <= 0.0:
        raise DominanceError(f"dominance gap {h:.3e} is not positive")
    return 1.0 / h
