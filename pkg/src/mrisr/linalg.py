"""Dense and banded linear solves plus Newton iteration.

Banded matrices use the LAPACK general-band layout: data[mu + i - j, j]
holds entry (i, j) for the in-band positions.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import NewtonFailure, SingularMatrixError


@dataclass
class BandedMatrix:
    """Square banded matrix with ml sub- and mu super-diagonals."""

    ml: int
    mu: int
    data: np.ndarray  # shape (ml + mu + 1, n)

    @property
    def n(self):
        return self.data.shape[1]

    def to_dense(self):
        n = self.n
        A = np.zeros((n, n))
        for i in range(n):
            lo = max(0, i - self.ml)
            hi = min(n, i + self.mu + 1)
            for j in range(lo, hi):
                A[i, j] = self.data[self.mu + i - j, j]
        return A


class Factorization:
    """LU factorization reusable across solves (modified Newton)."""

    def __init__(self, A):
        if isinstance(A, BandedMatrix):
            ml, mu, n = A.ml, A.mu, A.n
            ab = np.zeros((2 * ml + mu + 1, n))
            ab[ml:, :] = A.data
            lu, piv, info = lapack.dgbtrf(ab, ml, mu)
            if info > 0:
                raise SingularMatrixError(
                    f"banded factorization: zero pivot at {info}")
            if info < 0:
                raise ValueError(f"dgbtrf illegal argument {-info}")
            self._kind = "banded"
            self._lu, self._piv, self._ml, self._mu = lu, piv, ml, mu
        else:
            A = np.asarray(A, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError("need a square matrix")
            try:
                lu, piv = scipy.linalg.lu_factor(A)
            except scipy.linalg.LinAlgError as e:
                raise SingularMatrixError(str(e)) from None
            if not np.all(np.isfinite(lu)):
                raise SingularMatrixError("non-finite factorization")
            if np.any(np.abs(np.diag(lu)) == 0.0):
                raise SingularMatrixError("zero pivot in dense LU")
            self._kind = "dense"
            self._lu, self._piv = lu, piv

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if self._kind == "banded":
            x, info = lapack.dgbtrs(self._lu, self._ml, self._mu, rhs,
                                    self._piv)
            if info != 0:
                raise SingularMatrixError(f"dgbtrs failed, info={info}")
            return x
        return scipy.linalg.lu_solve((self._lu, self._piv), rhs)


def linear_solve(A, rhs):
    """Solve A x = rhs via LU with partial pivoting (dense or banded A)."""
    return Factorization(A).solve(rhs)


def wrms(v, weights):
    """Weighted root-mean-square norm: sqrt(mean((v * weights)^2))."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean((v * weights) ** 2)))


def newton_solve(residual, jacobian, guess, tol=1.0, atol=1e-12, rtol=1e-10,
                 max_iter=10, modified=True, counters=None):
    """Solve residual(x) = 0 by (modified) Newton iteration.

    Convergence: WRMS norm of the update, with weights 1/(atol + rtol*|x|)
    frozen at the initial guess, falls to <= tol. With modified=True the
    Jacobian is factored once at the guess and reused. `counters`, when
    given, is a dict accumulating 'newton_iters' and 'linear_solves'.

    Returns (root, iterations).
    """
    x = np.array(guess, dtype=float)
    weights = 1.0 / (atol + rtol * np.abs(x))
    fac = Factorization(jacobian(x))
    for it in range(1, max_iter + 1):
        f = np.asarray(residual(x), dtype=float)
        if not np.all(np.isfinite(f)):
            raise NewtonFailure("non-finite residual during Newton iteration")
        delta = fac.solve(-f)
        x = x + delta
        if counters is not None:
            counters["newton_iters"] = counters.get("newton_iters", 0) + 1
            counters["linear_solves"] = counters.get("linear_solves", 0) + 1
        if not np.all(np.isfinite(x)):
            raise NewtonFailure("Newton iteration diverged")
        if wrms(delta, weights) <= tol:
            return x, it
        if not modified:
            fac = Factorization(jacobian(x))
    raise NewtonFailure(f"no convergence in {max_iter} Newton iterations")
