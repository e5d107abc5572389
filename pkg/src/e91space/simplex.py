"""Dense two-phase simplex for small equality-constrained linear programs.

Solves  min c.x  subject to  A x = b,  x >= 0.

The problems this package generates are tiny (tens of rows, at most a few
hundred columns), so a plain dense tableau with Bland's rule is the whole
story: no factorization updates, no presolve, no sparsity.  Bland's entering
and leaving rules guarantee termination; an iteration cap converts any
numerical stall into a SimplexDiagnosticError rather than a wrong verdict.

When the system is infeasible the returned row multipliers ``y`` form a
separating (Farkas) direction: y.A <= 0 componentwise while y.b > 0.  Callers
turn that direction into Bell-type certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 100_000


class SimplexDiagnosticError(RuntimeError):
    """The solver could not reach a verdict (iteration cap or degeneracy)."""


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    y: np.ndarray | None  # dual multipliers; Farkas direction when infeasible
    phase1_objective: float
    iterations: int


def find_feasible(A, b, tol: float = DEFAULT_TOL, maxiter: int = MAX_ITERATIONS) -> LpResult:
    """Feasibility-only solve (zero objective)."""
    A = np.asarray(A, dtype=float)
    return solve_lp(np.zeros(A.shape[1]), A, b, tol=tol, maxiter=maxiter)


def solve_lp(c, A, b, tol: float = DEFAULT_TOL, maxiter: int = MAX_ITERATIONS) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-d array")
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValueError("LP data must be finite")

    # Normalize to b >= 0; remember row flips to map duals back.
    flip = np.where(b < 0.0, -1.0, 1.0)
    A1 = A * flip[:, None]
    b1 = b * flip

    # Columns: n structural + m artificial.
    body = np.hstack([A1, np.eye(m)])
    rhs = b1.copy()
    basis = list(range(n, n + m))
    ext = body.copy()  # immutable copy for dual extraction

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    iterations = _pivot_until_optimal(body, rhs, basis, phase1_cost, n + m, tol, maxiter)

    phase1_obj = float(phase1_cost[basis] @ rhs)
    if phase1_obj > tol:
        y = _dual_from_basis(ext, basis, phase1_cost, m)
        return LpResult(
            status="infeasible",
            x=None,
            objective=None,
            y=flip * y,
            phase1_objective=phase1_obj,
            iterations=iterations,
        )

    # Phase 2: artificials stay in the tableau but may never re-enter.
    phase2_cost = np.concatenate([c, np.zeros(m)])
    try:
        iterations += _pivot_until_optimal(
            body, rhs, basis, phase2_cost, n, tol, maxiter - iterations
        )
    except _Unbounded:
        return LpResult(
            status="unbounded",
            x=None,
            objective=None,
            y=None,
            phase1_objective=phase1_obj,
            iterations=iterations,
        )

    x_ext = np.zeros(n + m)
    x_ext[basis] = rhs
    x = x_ext[:n]
    y = _dual_from_basis(ext, basis, phase2_cost, m)
    return LpResult(
        status="optimal",
        x=x,
        objective=float(c @ x),
        y=flip * y,
        phase1_objective=phase1_obj,
        iterations=iterations,
    )


class _Unbounded(Exception):
    pass


def _pivot_until_optimal(body, rhs, basis, cost, n_enterable, tol, maxiter) -> int:
    """Bland-rule pivoting in place; returns the iteration count."""
    m = body.shape[0]
    for iteration in range(max(0, maxiter)):
        reduced = cost - cost[basis] @ body
        entering = -1
        for j in range(n_enterable):  # smallest eligible index (Bland)
            if j not in basis and reduced[j] < -tol:
                entering = j
                break
        if entering < 0:
            return iteration

        col = body[:, entering]
        best_ratio = None
        leaving = -1
        for i in range(m):
            if col[i] > tol:
                ratio = rhs[i] / col[i]
                if (
                    best_ratio is None
                    or ratio < best_ratio - tol
                    or (abs(ratio - best_ratio) <= tol and basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise _Unbounded()

        pivot = body[leaving, entering]
        body[leaving] /= pivot
        rhs[leaving] /= pivot
        for i in range(m):
            if i != leaving and body[i, entering] != 0.0:
                factor = body[i, entering]
                body[i] -= factor * body[leaving]
                rhs[i] -= factor * rhs[leaving]
        rhs[leaving] = max(rhs[leaving], 0.0)  # guard fp droop on degenerate rows
        basis[leaving] = entering
    raise SimplexDiagnosticError(f"simplex did not terminate within {maxiter} iterations")


def _dual_from_basis(ext, basis, cost, m) -> np.ndarray:
    """Row multipliers y = c_B B^-1 from the original column data."""
    B = ext[:, basis]
    try:
        return np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError as exc:
        raise SimplexDiagnosticError(f"singular basis while extracting duals: {exc}") from exc
