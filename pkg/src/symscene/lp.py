"""Small dense two-phase simplex for ``min c.x  s.t.  A x <= b`` with free ``x``.

Sized for the problems the verifier produces (a few dozen rows, at most a
dozen columns). Rows are normalized to unit norm so the phase-1 optimum is a
violation measured in state units, which is what the feasibility tolerance
``TAU_LP`` is compared against.
"""

from __future__ import annotations

import numpy as np

TAU_LP = 1e-9
_PIVOT_TOL = 1e-12
_MAX_ITER = 5000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPError(RuntimeError):
    pass


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvec = T[:, col].copy()
    colvec[row] = 0.0
    T -= np.outer(colvec, T[row])
    basis[row] = col


def _run_simplex(T, basis, ncols, tol):
    """Iterate on tableau ``T`` (last row = reduced costs, last col = rhs).

    Only the first ``ncols`` columns may enter. Dantzig's rule, switching to
    Bland's rule after a run of degenerate pivots.
    """
    degenerate = 0
    for _ in range(_MAX_ITER):
        d = T[-1, :ncols]
        if degenerate > 50:
            cand = np.flatnonzero(d < -tol)
            if cand.size == 0:
                return OPTIMAL
            col = int(cand[0])
        else:
            col = int(np.argmin(d))
            if d[col] >= -tol:
                return OPTIMAL
        colvals = T[:-1, col]
        pos = colvals > _PIVOT_TOL
        if not pos.any():
            return UNBOUNDED
        ratios = np.full(colvals.shape, np.inf)
        ratios[pos] = T[:-1, -1][pos] / colvals[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-15)
        row = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if best <= 1e-15 else 0
        _pivot(T, basis, row, col)
    raise LPError("simplex iteration limit reached")


class LinearProgram:
    """Feasible region ``{x : A x <= b}``; phase 1 runs once at construction.

    ``feasible`` tells whether the region is nonempty (up to ``tol``);
    :meth:`minimize` then reuses the feasible basis for any objective.
    """

    def __init__(self, A, b, tol=TAU_LP):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b have inconsistent row counts")
        self.n = A.shape[1]
        self.tol = tol
        norms = np.linalg.norm(A, axis=1)
        zero = norms <= 1e-300
        # 0.x <= b rows: trivially true or trivially false
        if np.any(b[zero] < -tol):
            self.feasible = False
            return
        A = A[~zero] / norms[~zero, None]
        b = b[~zero] / norms[~zero]
        m, n = A.shape
        self._m = m
        if m == 0:
            self.feasible = True
            self._T = None
            return

        neg = b < 0
        k = int(neg.sum())
        nvar = 2 * n + m + k
        T = np.zeros((m + 1, nvar + 1))
        sign = np.where(neg, -1.0, 1.0)
        T[:m, :n] = A * sign[:, None]
        T[:m, n:2 * n] = -A * sign[:, None]
        T[:m, 2 * n:2 * n + m] = np.diag(sign)
        T[:m, -1] = b * sign
        basis = np.empty(m, dtype=int)
        art_rows = np.flatnonzero(neg)
        for j, i in enumerate(art_rows):
            T[i, 2 * n + m + j] = 1.0
            basis[i] = 2 * n + m + j
        ok_rows = np.flatnonzero(~neg)
        basis[ok_rows] = 2 * n + ok_rows

        if k:
            T[-1, :] = -T[art_rows].sum(axis=0)
            T[-1, 2 * n + m:2 * n + m + k] = 0.0
            _run_simplex(T, basis, nvar, 1e-12)
            if -T[-1, -1] > tol:
                self.feasible = False
                return
            # drive remaining artificials out of the basis
            keep = np.ones(m + 1, dtype=bool)
            for i in range(m):
                if basis[i] >= 2 * n + m:
                    cand = np.flatnonzero(np.abs(T[i, :2 * n + m]) > 1e-9)
                    if cand.size:
                        _pivot(T, basis, i, int(cand[0]))
                    else:
                        keep[i] = False
            T = np.delete(T, np.s_[2 * n + m:2 * n + m + k], axis=1)[keep]
            basis = basis[keep[:-1]]
        self.feasible = True
        self._T = T
        self._basis = basis

    def minimize(self, c):
        """Return ``(status, value, x)``; ``x`` is None unless optimal."""
        if not self.feasible:
            return INFEASIBLE, np.inf, None
        c = np.asarray(c, dtype=float).reshape(-1)
        n = self.n
        if self._T is None:
            if np.allclose(c, 0.0):
                return OPTIMAL, 0.0, np.zeros(n)
            return UNBOUNDED, -np.inf, None
        T = self._T.copy()
        basis = self._basis.copy()
        nvar = T.shape[1] - 1
        cost = np.zeros(nvar)
        cost[:n] = c
        cost[n:2 * n] = -c
        T[-1, :-1] = cost
        T[-1, -1] = 0.0
        for i, j in enumerate(basis):
            if cost[j] != 0.0:
                T[-1] -= cost[j] * T[i]
        status = _run_simplex(T, basis, nvar, 1e-12)
        if status == UNBOUNDED:
            return UNBOUNDED, -np.inf, None
        z = np.zeros(nvar)
        z[basis] = T[:-1, -1]
        x = z[:n] - z[n:2 * n]
        return OPTIMAL, float(c @ x), x


def is_feasible(A, b, tol=TAU_LP):
    return LinearProgram(A, b, tol).feasible
