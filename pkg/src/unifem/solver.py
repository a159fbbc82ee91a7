"""Linear solves and full-step Newton on the global residual/Jacobian pair."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SparseMatrix

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


class LinearSolveError(RuntimeError):
    pass


class SingularMatrixError(LinearSolveError):
    pass


class ConvergenceError(LinearSolveError):
    pass


def _as_operator(A):
    if isinstance(A, SparseMatrix):
        return A.to_scipy()
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A, dtype=float)


def conjugate_gradient(A, b, tol=1e-12, maxiter=None, x0=None):
    """Unpreconditioned CG; stops when ``||r|| <= tol * ||b||``.

    Returns ``(x, iterations)``; raises ConvergenceError if ``maxiter``
    (default ``10 n``) is reached.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    p = r.copy()
    rr = r @ r
    target = tol * np.linalg.norm(b)
    if np.sqrt(rr) <= target:
        return x, 0
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise ConvergenceError(f"CG: non-positive curvature {pAp:.3e}; matrix not SPD")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= target:
            return x, k
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError(f"CG did not reach {tol:g} in {maxiter} iterations")


def solve_linear(A, b, spd: bool = False, tol: float = 1e-12, check: float = 1e-10) -> np.ndarray:
    """Solve ``A x = b``.

    SPD systems use conjugate gradients; otherwise dense LU with partial
    pivoting up to ``DENSE_LIMIT`` unknowns and sparse LU beyond.  The
    relative residual is verified against ``check``.
    """
    op = _as_operator(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    if op.shape != (n, n):
        raise LinearSolveError(f"matrix shape {op.shape} does not match rhs length {n}")
    if n == 0:
        return np.zeros(0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n)
    if spd:
        x, its = conjugate_gradient(op, b, tol=tol)
        log.debug("CG converged in %d iterations", its)
    elif n <= DENSE_LIMIT:
        dense = op.toarray() if sp.issparse(op) else op
        with warnings.catch_warnings():
            # singularity is reported below as SingularMatrixError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(dense, check_finite=True)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= np.finfo(float).eps * max(pivots.max(), 1.0) * n:
            raise SingularMatrixError("matrix is singular to working precision")
        x = sla.lu_solve((lu, piv), b)
    else:
        try:
            x = spla.splu(sp.csc_matrix(op)).solve(b)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
    rel = np.linalg.norm(op @ x - b) / bnorm
    if not rel <= check:
        raise LinearSolveError(f"relative residual {rel:.3e} exceeds {check:g}")
    return x


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False
    reason: str = ""


def newton_solve(problem, u0, atol=1e-10, rtol=1e-10, maxit=25, divergence=1e8):
    """Full-step Newton.  ``problem`` provides ``residual(u)``, ``jacobian(u)``, ``spd``.

    Stops on ``||F|| <= atol`` or ``||F|| / ||F_0|| <= rtol``.  A non-finite
    residual or growth beyond ``divergence * ||F_0||`` ends with reason
    ``"diverged"``; running out of iterations gives ``"maxit"``.  Either way
    the iterate with the smallest residual is returned.
    """
    u = np.array(u0, dtype=float)
    F = problem.residual(u)
    norm0 = float(np.linalg.norm(F))
    report = NewtonReport(residual_norms=[norm0])
    best_u, best = u.copy(), norm0
    if norm0 <= atol:
        report.converged, report.reason = True, "atol"
        return u, report
    for k in range(1, maxit + 1):
        J = problem.jacobian(u)
        du = solve_linear(J, -F, spd=getattr(problem, "spd", False))
        u = u + du
        F = problem.residual(u)
        norm = float(np.linalg.norm(F))
        report.iterations = k
        report.residual_norms.append(norm)
        log.info("newton %d: |F| = %.6e", k, norm)
        if not np.isfinite(norm) or norm > divergence * norm0:
            report.reason = "diverged"
            return best_u, report
        if norm < best:
            best_u, best = u.copy(), norm
        if norm <= atol:
            report.converged, report.reason = True, "atol"
            return u, report
        if norm <= rtol * norm0:
            report.converged, report.reason = True, "rtol"
            return u, report
    report.reason = "maxit"
    return best_u, report
