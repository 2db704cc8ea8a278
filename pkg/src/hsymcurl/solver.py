"""Linear solvers for symmetric positive definite systems."""
import numpy as np
import scipy.linalg


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    pass


class IndefiniteMatrixError(SolverError):
    def __init__(self, iteration, curvature):
        super().__init__(
            f"non-positive curvature p^T A p = {curvature:.3e} in search direction "
            f"of iteration {iteration}")
        self.iteration = iteration
        self.curvature = curvature


class SingularMatrixError(SolverError):
    pass


def cg_solve(A, b, rel_tol=1e-10, max_iter=None, preconditioner="jacobi", x0=None,
             history=None, callback=None):
    """Preconditioned conjugate gradients.

    Returns ``(x, iterations, relative_residual)``.  ``history``, if a list,
    receives the relative residual after every iteration; ``callback`` is
    called with a copy of every iterate.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(10 * n, 100)
    if preconditioner == "jacobi":
        d = np.asarray(A.diagonal(), dtype=float)
        if np.any(d <= 0):
            raise IndefiniteMatrixError(0, float(d.min()))
        inv_d = 1.0 / d
    elif preconditioner in (None, "none"):
        inv_d = None
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    r = b - A @ x
    z = r * inv_d if inv_d is not None else r.copy()
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    if res <= rel_tol:
        return x, 0, res
    for it in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise IndefiniteMatrixError(it, float(curv))
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if history is not None:
            history.append(res)
        if callback is not None:
            callback(x.copy())
        if res <= rel_tol:
            true = np.linalg.norm(b - A @ x) / bnorm
            if true <= 10 * rel_tol:
                return x, it, true
            r = b - A @ x
        z = r * inv_d if inv_d is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach {rel_tol:g} in {max_iter} iterations "
                           f"(residual {res:.3e})")


def dense_solve(A, b):
    """Dense symmetric solve (LDL^T factorisation) for small systems."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    if A.shape[0] > 2000:
        raise ValueError("dense_solve is limited to n <= 2000")
    try:
        lu, d, perm = scipy.linalg.ldl(A, lower=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularMatrixError(str(exc)) from exc
    # d is block diagonal (1x1/2x2 pivots); check for singular pivots
    dscale = np.max(np.abs(d)) if d.size else 0.0
    evd = np.linalg.eigvalsh(d) if d.size else np.zeros(0)
    if dscale == 0.0 or np.min(np.abs(evd)) <= 1e-14 * dscale:
        raise SingularMatrixError("matrix is singular to working precision")
    y = scipy.linalg.solve_triangular(lu[perm], np.asarray(b, dtype=float)[perm], lower=True,
                                      unit_diagonal=True)
    w = np.linalg.solve(d, y)
    x = np.empty_like(w)
    x[perm] = scipy.linalg.solve_triangular(lu[perm].T, w, lower=False, unit_diagonal=True)
    return x
