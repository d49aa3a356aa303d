"""Reduced steppers on shape space x SO(3) body coordinates.

For systems whose configuration splits into shape coordinates ``x`` and a
rotation handled in body coordinates, the stepper advances
``(x, p, xi, p_alg, lam)`` where ``xi`` is the body angular velocity of
the step interval and ``p_alg`` the body angular momentum.  Group elements
never appear during stepping — a retraction ``tau`` (Cayley by default)
maps ``h*xi`` to the incremental rotation, and the inverse retraction
tangent moves momenta between the two endpoints of the increment
(:func:`reduced_legendre`).  The full rotation history can be recovered
afterwards with :func:`reconstruct`.

The rolling sphere on a uniformly rotating plate ships as the worked
system: :func:`chaplygin_step` advances its five coupled discrete
equations (contact position and body angular velocity) with an analytic
Jacobian, and :func:`chaplygin_reduced_system` exposes the same mechanics
to the generic reduced stepper for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .lie_so3 import cay, dcay_inv, dexp_inv, exp_so3
from .model import RankDeficient, ReducedState, ReducedSystem
from .numerics import (
    NewtonConfig,
    NoConvergence,
    SingularMatrix,
    default_newton_config,
    lu_solve,
    newton_solve_stats,
)

__all__ = [
    "RetractedDiscreteLagrangian",
    "ChaplyginParams",
    "standard_retracted_lagrangian",
    "reduced_legendre",
    "reduced_rattle_step",
    "reduced_scheme_residual",
    "chaplygin_step",
    "chaplygin_step_stats",
    "chaplygin_scheme_residual",
    "chaplygin_contact_velocity",
    "chaplygin_init",
    "chaplygin_reduced_system",
    "chaplygin_initial_reduced_state",
    "reconstruct",
]

_RETRACTIONS = {
    "cay": (cay, dcay_inv),
    "exp": (exp_so3, dexp_inv),
}


def _retraction(name: str):
    try:
        return _RETRACTIONS[name]
    except KeyError:
        raise ValueError(f"unknown retraction {name!r}; choose from {sorted(_RETRACTIONS)}")


@dataclass(frozen=True)
class RetractedDiscreteLagrangian:
    """Partial derivatives of a discrete Lagrangian in retracted
    coordinates ``(x0, x1, sigma)`` with ``sigma = h*xi`` the algebra
    increment.  ``d1``/``d2`` are the shape gradients, ``d3`` the algebra
    gradient; all take ``(x0, x1, sigma, h)``."""

    d1: Callable
    d2: Callable
    d3: Callable


def standard_retracted_lagrangian(rsys: ReducedSystem) -> RetractedDiscreteLagrangian:
    """Midpoint-kinetic discretization of a constant-metric reduced system:

        l_d = |dx|^2_Gs / 2h + dx . Gc sigma / h + |sigma|^2_Ga / 2h
              - h (V(x0) + V(x1)) / 2

    differentiated in closed form."""
    n = rsys.shape_dim
    gs = rsys.bundle_metric[:n, :n]
    gc = rsys.bundle_metric[:n, n:]
    ga = rsys.bundle_metric[n:, n:]

    def d1(x0, x1, sigma, h):
        v = (x1 - x0) / h
        return -(gs @ v) - gc @ (sigma / h) - 0.5 * h * np.asarray(
            rsys.grad_potential(x0)
        )

    def d2(x0, x1, sigma, h):
        v = (x1 - x0) / h
        return gs @ v + gc @ (sigma / h) - 0.5 * h * np.asarray(rsys.grad_potential(x1))

    def d3(x0, x1, sigma, h):
        v = (x1 - x0) / h
        return gc.T @ v + ga @ (sigma / h)

    return RetractedDiscreteLagrangian(d1, d2, d3)


def reduced_legendre(
    ld: RetractedDiscreteLagrangian,
    x0: np.ndarray,
    x1: np.ndarray,
    xi: np.ndarray,
    h: float,
    retraction: str = "cay",
) -> Tuple[np.ndarray, np.ndarray]:
    """Discrete Legendre transforms of a retracted Lagrangian.

    Returns the pre- and post-momenta ``(p_minus, p_plus)`` as
    concatenated (shape, algebra) vectors: shape parts are ``-D1`` and
    ``+D2``; algebra parts apply the transpose of the inverse retraction
    tangent at ``+h*xi`` (pre) and ``-h*xi`` (post) to ``D3``.
    """
    _, dtau_inv = _retraction(retraction)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    sigma = h * np.asarray(xi, dtype=float)
    d3 = np.asarray(ld.d3(x0, x1, sigma, h), dtype=float)
    p_minus = np.concatenate(
        [-np.asarray(ld.d1(x0, x1, sigma, h), dtype=float), dtau_inv(sigma).T @ d3]
    )
    p_plus = np.concatenate(
        [np.asarray(ld.d2(x0, x1, sigma, h), dtype=float), dtau_inv(-sigma).T @ d3]
    )
    return p_minus, p_plus


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if gram.shape == (1, 1):
        if gram[0, 0] <= 0.0:
            raise RankDeficient("constraint row vanishes")
        return rhs / gram[0, 0]
    try:
        return lu_solve(gram, rhs)
    except SingularMatrix as exc:
        raise RankDeficient("constraint rows are linearly dependent") from exc


def reduced_rattle_step(
    rsys: ReducedSystem,
    ld: RetractedDiscreteLagrangian,
    s: ReducedState,
    h: float,
    retraction: str = "cay",
    cfg: Optional[NewtonConfig] = None,
) -> ReducedState:
    """One step of the staged reduced scheme.

    Stage 1 (explicit): half-kick the shape momentum with the carried
    multiplier and advance the shape point using the shape-block metric.
    Stage 2 (linear): transport the algebra momentum with the coadjoint
    action of ``tau(h*xi)``, then solve the m x m system that makes the
    averaged combined momentum satisfy the (affine) constraint at the new
    shape point; this yields the new multiplier and both momenta.
    Stage 3 (Newton, k unknowns): recover the new interval velocity
    ``xi`` from the algebra-momentum matching condition, substituting the
    forward shape update, with the current ``xi`` as predictor.
    """
    if h == 0.0:
        return s
    if rsys.algebra_dim != 3:
        raise ValueError("reduced stepping is implemented for a 3-dim algebra")
    tau, dtau_inv = _retraction(retraction)
    n = rsys.shape_dim
    gs = rsys.bundle_metric[:n, :n]
    gc = rsys.bundle_metric[:n, n:]
    gs_inv = np.linalg.inv(gs)

    # Stage 1: shape half-kick and drift.
    rows0 = rsys.annihilator_matrix(s.x)
    mu0 = rows0[:, :n]
    grad0 = np.asarray(rsys.grad_potential(s.x), dtype=float)
    p_half = s.p - 0.5 * h * (grad0 + mu0.T @ s.lam)
    x1 = s.x + h * (gs_inv @ (p_half - gc @ s.xi))

    # Coadjoint transport of the algebra momentum along the increment.
    rot = tau(h * s.xi)
    alg_trans = rot.T @ s.p_alg

    # Stage 2: multiplier from the averaged-momentum constraint at x1.
    rows1 = rsys.annihilator_matrix(x1)
    grad1 = np.asarray(rsys.grad_potential(x1), dtype=float)
    if rows1.shape[0]:
        mu1 = rows1[:, :n]
        eta1 = rows1[:, n:]
        w_mat = rows1 @ rsys.metric_inv
        gram = w_mat @ rows1.T
        base = np.concatenate([p_half - 0.5 * h * grad1, alg_trans])
        base = base - rsys.momentum_offset(x1)
        lam1 = (2.0 / h) * _solve_gram(gram, w_mat @ base)
        p1 = p_half - 0.5 * h * (grad1 + mu1.T @ lam1)
        alg1 = alg_trans - h * (eta1.T @ lam1)
    else:
        mu1 = np.zeros((0, n))
        lam1 = np.zeros(0)
        p1 = p_half - 0.5 * h * grad1
        alg1 = alg_trans

    # Stage 3: interval velocity from the algebra-momentum match.
    p_half_next = p1 - 0.5 * h * (grad1 + mu1.T @ lam1)

    def residual(xi_next):
        x2 = x1 + h * (gs_inv @ (p_half_next - gc @ xi_next))
        sigma = h * xi_next
        return dtau_inv(sigma).T @ np.asarray(
            ld.d3(x1, x2, sigma, h), dtype=float
        ) - alg1

    xi1, iters = newton_solve_stats(residual, s.xi.copy(), cfg=cfg)
    return ReducedState(x1, p1, xi1, alg1, lam1, newton_iters=iters)


def reduced_scheme_residual(
    rsys: ReducedSystem,
    s_prev: ReducedState,
    s_new: ReducedState,
    h: float,
    retraction: str = "cay",
) -> np.ndarray:
    """Residual of the averaged-momentum constraint a reduced step enforces:
    annihilator(x1) G^{-1} ((p1 ⊕ avg_alg) - Pi(x1)) with avg_alg the mean
    of the transported old and the new algebra momentum."""
    rows = rsys.annihilator_matrix(s_new.x)
    if rows.shape[0] == 0:
        return np.zeros(0)
    tau, _ = _retraction(retraction)
    alg_trans = tau(h * s_prev.xi).T @ s_prev.p_alg
    avg_alg = 0.5 * (alg_trans + s_new.p_alg)
    combined = np.concatenate([s_new.p, avg_alg]) - rsys.momentum_offset(s_new.x)
    return rows @ (rsys.metric_inv @ combined)


@dataclass(frozen=True)
class ChaplyginParams:
    """Inhomogeneous sphere of radius ``r`` and mass ``m`` rolling without
    slipping on a plate spinning at constant rate ``omega`` about the
    vertical axis through the origin; ``i1, i2, i3`` are the principal
    inertias."""

    m: float
    r: float
    omega: float
    i1: float
    i2: float
    i3: float

    def __post_init__(self):
        if self.m <= 0.0 or self.r <= 0.0:
            raise ValueError("mass and radius must be positive")
        if min(self.i1, self.i2, self.i3) <= 0.0:
            raise ValueError("principal inertias must be positive")

    @property
    def inertia(self) -> np.ndarray:
        return np.array([self.i1, self.i2, self.i3])


def chaplygin_reduced_system(params: ChaplyginParams) -> ReducedSystem:
    """The rolling-sphere mechanics as a reduced system: shape (x, y),
    so(3) fiber, block-diagonal metric, rolling-constraint annihilator
    rows, and the plate-rotation affine section."""
    p = params
    rows = np.array(
        [
            [1.0, 0.0, 0.0, -p.r, 0.0],
            [0.0, 1.0, p.r, 0.0, 0.0],
        ]
    )
    section = None
    if p.omega != 0.0:
        def section(x, _om=p.omega):
            return np.array([-_om * x[1], _om * x[0], 0.0, 0.0, 0.0])
    return ReducedSystem(
        shape_dim=2,
        algebra_dim=3,
        bundle_metric=np.diag([p.m, p.m, p.i1, p.i2, p.i3]),
        annihilator=lambda x: rows,
        num_constraints=2,
        affine_section=section,
    )


def chaplygin_contact_velocity(params: ChaplyginParams, q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Shape velocity enforced by the rolling constraints at (q, w):
    (r w2 - omega*y, -r w1 + omega*x)."""
    return np.array(
        [
            params.r * w[1] - params.omega * q[1],
            -params.r * w[0] + params.omega * q[0],
        ]
    )


def chaplygin_initial_reduced_state(
    params: ChaplyginParams, q0: np.ndarray, w0: np.ndarray, h: float
) -> ReducedState:
    """Reduced state matching :func:`chaplygin_init` seeding: constraint-
    consistent shape momentum, Legendre-consistent algebra momentum, zero
    carried multiplier."""
    q0 = np.asarray(q0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    v0 = chaplygin_contact_velocity(params, q0, w0)
    p_alg = dcay_inv(h * w0).T @ (params.inertia * w0)
    return ReducedState(q0, params.m * v0, w0, p_alg, np.zeros(2))


def chaplygin_init(params: ChaplyginParams, q0, w0, h: float) -> np.ndarray:
    """Second trajectory point from forward-difference forms of the two
    discrete constraint equations: q1 = q0 + h * contact_velocity."""
    q0 = np.asarray(q0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    return q0 + h * chaplygin_contact_velocity(params, q0, w0)


def chaplygin_step(
    params: ChaplyginParams,
    q_prev,
    q_curr,
    w_prev,
    h: float,
    cfg: Optional[NewtonConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Advance the five-equation discrete scheme of the rolling sphere.

    Unknowns: next contact point ``(x, y)`` and interval body angular
    velocity ``w``.  Solved monolithically by damped Newton with the
    analytic 5x5 Jacobian; predictor ``(2 q_curr - q_prev, w_prev)``.

    Returns ``(q_next, w_curr)``.

    Raises
    ------
    NoConvergence
        If the Newton budget is exhausted.
    """
    q_next, w, _iters, _res = _chaplygin_newton(params, q_prev, q_curr, w_prev, h, cfg)
    return q_next, w


def chaplygin_step_stats(
    params: ChaplyginParams,
    q_prev,
    q_curr,
    w_prev,
    h: float,
    cfg: Optional[NewtonConfig] = None,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Like :func:`chaplygin_step` but also returns the number of accepted
    Newton updates (used as a per-step diagnostic)."""
    q_next, w, iters, _res = _chaplygin_newton(params, q_prev, q_curr, w_prev, h, cfg)
    return q_next, w, iters


def _chaplygin_newton(params, q_prev, q_curr, w_prev, h, cfg=None):
    """Scalar-arithmetic Newton core for the five-equation step.

    Returns (q_next, w_curr, iterations, final_residual_norm).  Written
    with plain floats: sweeps take hundreds of thousands of steps and this
    loop is the hot path.

    Convergence is measured on row-scaled residuals (momentum-balance rows
    by h/(m r), constraint rows by 2h, spin row by 1/i3) so that the test
    is in position/velocity units and independent of step size; the raw
    equations carry 1/h leading terms whose evaluation noise would swamp
    an absolute tolerance at fine resolution.  Row scaling leaves the
    Newton updates themselves unchanged.
    """
    if cfg is None:
        cfg = default_newton_config()
    tol = cfg.residual_tol
    max_iters = cfg.max_iters

    m, r, om = params.m, params.r, params.omega
    i1, i2, i3 = params.i1, params.i2, params.i3
    x0, y0 = float(q_curr[0]), float(q_curr[1])
    xm, ym = float(q_prev[0]), float(q_prev[1])
    v1, v2, v3 = float(w_prev[0]), float(w_prev[1]), float(w_prev[2])

    sv = i1 * v1 * v1 + i2 * v2 * v2 + i3 * v3 * v3
    mr_h = m * r / h
    inv2h = 1.0 / (2.0 * h)
    h2_4 = 0.25 * h * h
    # Constant (known) parts of the five residuals.
    c1 = -mr_h * (2.0 * x0 - xm) - i2 * v2 + 0.5 * h * (i1 - i3) * v1 * v3 - h2_4 * v2 * sv
    c2 = -mr_h * (2.0 * y0 - ym) + i1 * v1 - 0.5 * h * (i3 - i2) * v2 * v3 + h2_4 * v1 * sv
    c3 = -i3 * v3 + 0.5 * h * (i2 - i1) * v1 * v2 - h2_4 * v3 * sv
    c4 = -xm * inv2h + om * y0 - 0.5 * r * v2 + 0.25 * r * h * ((i1 - i3) / i2) * v1 * v3 \
        - (r * h * h / (8.0 * i2)) * v2 * sv
    c5 = -ym * inv2h - om * x0 + 0.5 * r * v1 - 0.25 * r * h * ((i3 - i2) / i1) * v2 * v3 \
        + (r * h * h / (8.0 * i1)) * v1 * sv

    k13 = 0.5 * h * (i1 - i3)
    k32 = 0.5 * h * (i3 - i2)
    k21 = 0.5 * h * (i2 - i1)
    a4 = 0.25 * r * h * ((i1 - i3) / i2)
    a5 = 0.25 * r * h * ((i3 - i2) / i1)
    b4 = r * h * h / (8.0 * i2)
    b5 = r * h * h / (8.0 * i1)

    # Row scales bringing each residual to position/velocity units.
    s12 = h / (m * r)
    s3 = 1.0 / i3
    s45 = 2.0 * h

    def residual(xp, yp, w1, w2, w3):
        s = i1 * w1 * w1 + i2 * w2 * w2 + i3 * w3 * w3
        f1 = s12 * (mr_h * xp + i2 * w2 + k13 * w1 * w3 + h2_4 * w2 * s + c1)
        f2 = s12 * (mr_h * yp - i1 * w1 - k32 * w2 * w3 - h2_4 * w1 * s + c2)
        f3 = s3 * (i3 * w3 + k21 * w1 * w2 + h2_4 * w3 * s + c3)
        f4 = s45 * (inv2h * xp - 0.5 * r * w2 - a4 * w1 * w3 - b4 * w2 * s + c4)
        f5 = s45 * (inv2h * yp + 0.5 * r * w1 + a5 * w2 * w3 + b5 * w1 * s + c5)
        return f1, f2, f3, f4, f5, s

    # Predictor.
    xp, yp = 2.0 * x0 - xm, 2.0 * y0 - ym
    w1, w2, w3 = v1, v2, v3
    f1, f2, f3, f4, f5, s = residual(xp, yp, w1, w2, w3)
    norm = max(abs(f1), abs(f2), abs(f3), abs(f4), abs(f5))

    for iteration in range(max_iters):
        if norm <= tol:
            return (
                np.array([xp, yp]),
                np.array([w1, w2, w3]),
                iteration,
                norm,
            )
        h2_2 = 2.0 * h2_4
        jac = [
            [s12 * mr_h, 0.0,
             s12 * (k13 * w3 + h2_2 * i1 * w1 * w2),
             s12 * (i2 + h2_4 * (s + 2.0 * i2 * w2 * w2)),
             s12 * (k13 * w1 + h2_2 * i3 * w3 * w2)],
            [0.0, s12 * mr_h,
             s12 * (-i1 - h2_4 * (s + 2.0 * i1 * w1 * w1)),
             s12 * (-k32 * w3 - h2_2 * i2 * w2 * w1),
             s12 * (-k32 * w2 - h2_2 * i3 * w3 * w1)],
            [0.0, 0.0,
             s3 * (k21 * w2 + h2_2 * i1 * w1 * w3),
             s3 * (k21 * w1 + h2_2 * i2 * w2 * w3),
             s3 * (i3 + h2_4 * (s + 2.0 * i3 * w3 * w3))],
            [s45 * inv2h, 0.0,
             s45 * (-a4 * w3 - 2.0 * b4 * i1 * w1 * w2),
             s45 * (-0.5 * r - b4 * (s + 2.0 * i2 * w2 * w2)),
             s45 * (-a4 * w1 - 2.0 * b4 * i3 * w3 * w2)],
            [0.0, s45 * inv2h,
             s45 * (0.5 * r + b5 * (s + 2.0 * i1 * w1 * w1)),
             s45 * (a5 * w3 + 2.0 * b5 * i2 * w2 * w1),
             s45 * (a5 * w2 + 2.0 * b5 * i3 * w3 * w1)],
        ]
        rhs = [-f1, -f2, -f3, -f4, -f5]
        delta = _solve5(jac, rhs)
        if delta is None:
            raise NoConvergence(iteration, norm)

        alpha = 1.0
        for _ in range(8):
            t1 = xp + alpha * delta[0]
            t2 = yp + alpha * delta[1]
            t3 = w1 + alpha * delta[2]
            t4 = w2 + alpha * delta[3]
            t5 = w3 + alpha * delta[4]
            g1, g2, g3, g4, g5, s_t = residual(t1, t2, t3, t4, t5)
            trial_norm = max(abs(g1), abs(g2), abs(g3), abs(g4), abs(g5))
            if trial_norm < norm:
                break
            alpha *= 0.5
        xp, yp, w1, w2, w3 = t1, t2, t3, t4, t5
        f1, f2, f3, f4, f5, s = g1, g2, g3, g4, g5, s_t
        norm = trial_norm

    if norm <= tol:
        return np.array([xp, yp]), np.array([w1, w2, w3]), max_iters, norm
    raise NoConvergence(max_iters, norm)


def _solve5(a, b):
    """In-place Gaussian elimination with partial pivoting on a 5x5 list
    system; returns None on a (numerically) singular pivot."""
    n = 5
    for col in range(n):
        pivot_row = col
        pivot_mag = abs(a[col][col])
        for row in range(col + 1, n):
            mag = abs(a[row][col])
            if mag > pivot_mag:
                pivot_row, pivot_mag = row, mag
        if pivot_mag <= 1e-300:
            return None
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
            b[col], b[pivot_row] = b[pivot_row], b[col]
        arow = a[col]
        pivot = arow[col]
        for row in range(col + 1, n):
            factor = a[row][col] / pivot
            if factor != 0.0:
                brow = a[row]
                for j in range(col + 1, n):
                    brow[j] -= factor * arow[j]
                b[row] -= factor * b[col]
    x = [0.0] * n
    for row in range(n - 1, -1, -1):
        acc = b[row]
        arow = a[row]
        for j in range(row + 1, n):
            acc -= arow[j] * x[j]
        x[row] = acc / arow[row]
    return x


def chaplygin_scheme_residual(params, q_prev, q_curr, q_next, w_prev, w_curr, h):
    """Residuals of the two discretized rolling constraints (the 4th and
    5th scheme equations) at the accepted step; diagnostic."""
    m, r, om = params.m, params.r, params.omega
    i1, i2, i3 = params.i1, params.i2, params.i3
    v1, v2, v3 = float(w_prev[0]), float(w_prev[1]), float(w_prev[2])
    w1, w2, w3 = float(w_curr[0]), float(w_curr[1]), float(w_curr[2])
    s = i1 * w1 * w1 + i2 * w2 * w2 + i3 * w3 * w3
    sv = i1 * v1 * v1 + i2 * v2 * v2 + i3 * v3 * v3
    f4 = (
        (q_next[0] - q_prev[0]) / (2.0 * h)
        + om * q_curr[1]
        - 0.5 * r * (w2 + v2)
        - 0.25 * r * h * ((i1 - i3) / i2) * (w1 * w3 - v1 * v3)
        - (r * h * h / (8.0 * i2)) * (w2 * s + v2 * sv)
    )
    f5 = (
        (q_next[1] - q_prev[1]) / (2.0 * h)
        - om * q_curr[0]
        + 0.5 * r * (w1 + v1)
        + 0.25 * r * h * ((i3 - i2) / i1) * (w2 * w3 - v2 * v3)
        + (r * h * h / (8.0 * i1)) * (w1 * s + v1 * sv)
    )
    return np.array([f4, f5])


def reconstruct(seed: np.ndarray, xi_sequence, h: float, retraction: str = "cay") -> List[np.ndarray]:
    """Rebuild the rotation history from interval velocities:
    ``W_{k+1} = W_k tau(h xi_k)``.  Returns ``[W_0, ..., W_N]``."""
    tau, _ = _retraction(retraction)
    rots = [np.array(seed, dtype=float)]
    for xi in xi_sequence:
        rots.append(rots[-1] @ tau(h * np.asarray(xi, dtype=float)))
    return rots
