"""Small dense linear algebra and a damped Newton iteration.

Every implicit solve in this package funnels through the two entry points
here: :func:`lu_solve` for square linear systems (LU with partial pivoting,
explicit singularity detection) and :func:`newton_solve` for nonlinear
root-finding (finite-difference or user-supplied Jacobian, step damping).
Keeping the solvers in one place makes failure modes uniform: linear
degeneracies surface as :class:`SingularMatrix`, stalled iterations as
:class:`NoConvergence`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SingularMatrix",
    "NoConvergence",
    "NewtonConfig",
    "default_newton_config",
    "lu_solve",
    "newton_solve",
    "newton_solve_stats",
]

# Relative pivot threshold below which a matrix is declared singular.
_PIVOT_RTOL = 1e-14
# Maximum number of step halvings the Newton damping loop may take.
_MAX_HALVINGS = 8


class SingularMatrix(ValueError):
    """Raised when LU elimination meets a pivot too small to trust."""


class NoConvergence(RuntimeError):
    """Raised when Newton iteration exhausts its budget.

    Attributes
    ----------
    iterations : int
        Number of Newton iterations performed before giving up.
    final_residual : float
        Infinity norm of the residual at the last iterate.
    """

    def __init__(self, iterations: int, final_residual: float):
        super().__init__(
            f"Newton iteration did not converge after {iterations} iterations "
            f"(|residual|_inf = {final_residual:.3e})"
        )
        self.iterations = iterations
        self.final_residual = final_residual


@dataclass(frozen=True)
class NewtonConfig:
    """Tolerances and budgets for :func:`newton_solve`.

    Parameters
    ----------
    residual_tol : float
        Convergence threshold on the infinity norm of the residual.
    max_iters : int
        Iteration budget before :class:`NoConvergence` is raised.
    fd_step : float
        Absolute step for forward-difference Jacobian columns.
    """

    residual_tol: float = 1e-12
    max_iters: int = 50
    fd_step: float = 1e-7


def default_newton_config() -> NewtonConfig:
    """Return the default Newton configuration.

    The residual tolerance defaults to ``1e-12`` and may be overridden
    globally through the ``GNI_NEWTON_TOL`` environment variable.
    """
    tol = float(os.environ.get("GNI_NEWTON_TOL", "1e-12"))
    return NewtonConfig(residual_tol=tol)


def lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve the square linear system ``a @ x = b``.

    Gaussian elimination with partial pivoting on a copy of ``a``.  ``b``
    may be a vector or a matrix of stacked right-hand-side columns; the
    result has the same shape.

    Raises
    ------
    SingularMatrix
        If any pivot falls at or below ``1e-14 * max|a|``, i.e. the matrix
        is singular or numerically rank deficient.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    b = np.array(b, dtype=float)
    vector_rhs = b.ndim == 1
    rhs = b.reshape(n, -1) if vector_rhs else b
    if rhs.shape[0] != n:
        raise ValueError(f"right-hand side has {rhs.shape[0]} rows, expected {n}")
    rhs = rhs.copy()

    scale = np.max(np.abs(a)) if n else 0.0
    threshold = _PIVOT_RTOL * scale

    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        pivot = a[pivot_row, col]
        if abs(pivot) <= threshold:
            raise SingularMatrix(
                f"pivot {abs(pivot):.3e} at column {col} is below "
                f"{_PIVOT_RTOL:g} * max|a| = {threshold:.3e}"
            )
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            rhs[[col, pivot_row]] = rhs[[pivot_row, col]]
        factors = a[col + 1:, col] / pivot
        a[col + 1:, col + 1:] -= np.outer(factors, a[col, col + 1:])
        rhs[col + 1:] -= np.outer(factors, rhs[col])

    x = np.empty_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x[:, 0] if vector_rhs else x


def _fd_jacobian(
    residual: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    r0: np.ndarray,
    step: float,
) -> np.ndarray:
    """Forward-difference Jacobian of ``residual`` at ``x``."""
    n = x.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        xj = x.copy()
        xj[j] += step
        jac[:, j] = (residual(xj) - r0) / step
    return jac


def newton_solve(
    residual: Callable,
    x0,
    cfg: Optional[NewtonConfig] = None,
    jacobian: Optional[Callable] = None,
):
    """Find ``x`` with ``|residual(x)|_inf <= cfg.residual_tol``.

    Damped Newton iteration: at each step the correction from the
    linearised system is applied with step length 1, and halved (at most
    eight times) while the residual norm fails to decrease.  The Jacobian
    is obtained from ``jacobian(x)`` when supplied and from forward finite
    differences with step ``cfg.fd_step`` otherwise.

    ``x0`` may be a scalar or a 1-D array; the result matches its shape.

    Raises
    ------
    NoConvergence
        If the tolerance is not met within ``cfg.max_iters`` iterations.
    SingularMatrix
        If a Newton system is numerically singular.
    """
    x, _ = newton_solve_stats(residual, x0, cfg=cfg, jacobian=jacobian)
    return x


def newton_solve_stats(
    residual: Callable,
    x0,
    cfg: Optional[NewtonConfig] = None,
    jacobian: Optional[Callable] = None,
):
    """Like :func:`newton_solve` but also report work done.

    Returns ``(x, iterations)`` where ``iterations`` counts accepted
    Newton updates (0 when the initial guess already satisfies the
    tolerance).
    """
    if cfg is None:
        cfg = default_newton_config()
    scalar_input = np.isscalar(x0) or np.ndim(x0) == 0
    x = np.atleast_1d(np.array(x0, dtype=float))

    def eval_residual(z: np.ndarray) -> np.ndarray:
        r = residual(z[0] if scalar_input else z)
        return np.atleast_1d(np.asarray(r, dtype=float))

    r = eval_residual(x)
    norm = np.max(np.abs(r)) if r.size else 0.0
    for iteration in range(cfg.max_iters):
        if norm <= cfg.residual_tol:
            return (x[0] if scalar_input else x), iteration
        if jacobian is not None:
            jac = np.atleast_2d(
                np.asarray(jacobian(x[0] if scalar_input else x), dtype=float)
            )
        else:
            jac = _fd_jacobian(eval_residual, x, r, cfg.fd_step)
        delta = lu_solve(jac, -r)
        alpha = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = x + alpha * delta
            r_trial = eval_residual(trial)
            trial_norm = np.max(np.abs(r_trial)) if r_trial.size else 0.0
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            alpha *= 0.5
        else:
            trial = x + alpha * delta
            r_trial = eval_residual(trial)
            trial_norm = np.max(np.abs(r_trial)) if r_trial.size else 0.0
        x, r, norm = trial, r_trial, trial_norm
    if norm <= cfg.residual_tol:
        return (x[0] if scalar_input else x), cfg.max_iters
    raise NoConvergence(cfg.max_iters, float(norm))
