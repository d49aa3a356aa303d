"""Trajectory container, verification harness, and convergence analysis.

The functions here drive the steppers: :func:`run` advances one trajectory
and records per-step diagnostics, :func:`convergence_sweep` measures
final-time errors against a reference over a list of step sizes and fits
log-log slopes, :func:`adjoint_check` measures composition defects of
stepper pairs, and :func:`check_suite` executes the package's invariant
batteries (used by the command-line ``check`` subcommand).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from . import model
from .model import PhaseState, ReducedState, constraint_residual, energy
from .numerics import NoConvergence, SingularMatrix
from .gni_reduced import (
    ChaplyginParams,
    chaplygin_init,
    chaplygin_scheme_residual,
    chaplygin_step_stats,
)

__all__ = [
    "BelowNoiseFloor",
    "StepFailed",
    "Trajectory",
    "ConvergenceReport",
    "run",
    "convergence_sweep",
    "adjoint_check",
    "slope_fit",
    "sample_admissible_states",
    "check_suite",
]

# Error channels reported by convergence sweeps, in fixed order.
CHANNELS = ("position", "velocity", "energy")

# Errors at or below this magnitude carry no order information.
_NOISE_FLOOR = 1e-14

# Absolute slack of the initial-admissibility precondition in run().
_ADMISSIBLE_TOL = 1e-8


class BelowNoiseFloor(ValueError):
    """Raised by :func:`slope_fit` when errors sit at rounding level, so no
    meaningful order can be measured."""


class StepFailed(RuntimeError):
    """A stepper raised during :func:`run`.

    Carries the failing step index (1-based: step ``k`` produces row ``k``),
    the original exception (``cause``), and the partial :class:`Trajectory`
    accumulated so far (``partial``).
    """

    def __init__(self, step: int, cause: Exception, partial: "Trajectory"):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause
        self.partial = partial


@dataclass
class Trajectory:
    """Time-indexed record of a run.

    ``states`` holds one state object per row; ``residuals`` is the
    infinity norm of the applicable constraint residual per row, and
    ``energies`` the energy monitor per row.
    """

    times: np.ndarray
    states: list
    energies: np.ndarray
    residuals: np.ndarray
    newton_iters: np.ndarray
    h: float

    @classmethod
    def from_rows(cls, system, times, states, h: float) -> "Trajectory":
        """Build a trajectory computing default (momentum-form) diagnostics."""
        energies = np.array([energy(system, s) for s in states])
        residuals = np.array(
            [_inf_norm(constraint_residual(system, s)) for s in states]
        )
        iters = np.array([getattr(s, "newton_iters", 0) for s in states], dtype=int)
        return cls(
            times=np.asarray(times, dtype=float),
            states=list(states),
            energies=energies,
            residuals=residuals,
            newton_iters=iters,
            h=h,
        )

    @property
    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.states)


@dataclass
class ConvergenceReport:
    """Final-time errors over a family of step sizes with fitted orders.

    ``errors`` maps each channel (``"position"``, ``"velocity"``,
    ``"energy"``) to the error at each ``h``; ``slopes`` maps the channels
    that admit a fit to ``(slope, rms log residual)``; channels whose
    errors sit at rounding level land in ``noise_floor`` instead.
    """

    h_values: np.ndarray
    errors: Dict[str, np.ndarray]
    slopes: Dict[str, Tuple[float, float]]
    noise_floor: Set[str]

    def __post_init__(self):
        self.h_values = np.asarray(self.h_values, dtype=float)
        if self.h_values.size < 3:
            raise ValueError("a convergence report needs at least 3 step sizes")
        if not np.all(np.diff(self.h_values) < 0.0):
            raise ValueError("step sizes must be strictly decreasing")


def _inf_norm(vec) -> float:
    vec = np.atleast_1d(np.asarray(vec, dtype=float))
    return float(np.max(np.abs(vec))) if vec.size else 0.0


# ---------------------------------------------------------------------------
# trajectory running


def run(stepper, system, initial, h: float, n_steps: int) -> Trajectory:
    """Advance ``n_steps`` steps of size ``h`` and record diagnostics.

    For flat and reduced systems ``stepper`` is a one-step map with
    signature ``stepper(system, state, h) -> state`` and ``initial`` is the
    corresponding state object (its constraint residual must sit within the
    stepper's admissible set, allowing for the half-step potential shift of
    the one-sided schemes).  When ``system`` is a :class:`ChaplyginParams`
    the rolling-sphere two-point recurrence is used instead: ``initial`` is
    the pair ``(q0, w0)`` of contact point and body angular velocity, and
    ``stepper`` is ignored (pass :func:`gni.gni_reduced.chaplygin_step` for
    clarity).  Rolling-sphere rows pack the state as ``[x, y, w1, w2, w3]``
    where ``w`` is the angular velocity of the interval starting at that
    row's time; the energy monitor uses the central-difference contact
    velocity (forward difference on row 0).

    Raises
    ------
    StepFailed
        When the stepper's solver fails; carries the 1-based failing step
        index, the original exception, and the partial trajectory.
    ValueError
        For non-positive ``h`` / negative ``n_steps`` or an inadmissible
        initial state.
    """
    if h <= 0.0:
        raise ValueError("step size h must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if isinstance(system, ChaplyginParams):
        return _run_chaplygin(system, initial, h, n_steps)

    _check_admissible(system, initial, h)
    states = [initial]
    for k in range(1, n_steps + 1):
        try:
            states.append(stepper(system, states[-1], h))
        except (NoConvergence, SingularMatrix, model.RankDeficient) as exc:
            times = h * np.arange(k)
            raise StepFailed(
                k, exc, Trajectory.from_rows(system, times, states, h)
            ) from exc
    times = h * np.arange(n_steps + 1)
    return Trajectory.from_rows(system, times, states, h)


def _check_admissible(system, state, h: float) -> None:
    """Reject initial states off the admissible set.

    The plain momentum-form residual is compared against a tolerance that
    allows for the one-sided schemes' half-step potential shift (and, on
    the reduced side, the O(h) tilt of the transported body momentum), so
    states prepared for any built-in scheme pass while genuinely
    inadmissible data is caught.
    """
    res = _inf_norm(constraint_residual(system, state))
    slack = 0.0
    if isinstance(state, PhaseState):
        mu = system.constraint_matrix(state.q)
        if mu.shape[0]:
            shift = mu @ (system.mass_inv @ system.grad_potential(state.q))
            slack = 0.5 * h * _inf_norm(shift)
    elif isinstance(state, ReducedState):
        rows = system.annihilator_matrix(state.x)
        if rows.shape[0]:
            tilt = np.concatenate(
                [system.grad_potential(state.x), np.cross(state.xi, state.p_alg)]
            )
            slack = 0.5 * h * _inf_norm(rows @ (system.metric_inv @ tilt))
    if res > _ADMISSIBLE_TOL + slack:
        raise ValueError(
            f"initial state is not admissible: constraint residual {res:.3e}"
        )


def _run_chaplygin(
    params: ChaplyginParams, initial, h: float, n_steps: int, diagnostics: bool = True
) -> Trajectory:
    """Rolling-sphere runner: two-point recurrence with row conventions.

    Row ``k`` is ``(q_k, w^k)``; the solve producing row ``k`` consumes
    rows ``k-1`` and ``k``'s predecessor pair, so one configuration beyond
    the last row is kept internally for the final central difference.
    """
    q0, w0 = initial
    qs = [np.asarray(q0, dtype=float), chaplygin_init(params, q0, w0, h)]
    ws = [np.asarray(w0, dtype=float)]
    iters = [0]
    for k in range(1, n_steps + 1):
        try:
            q_next, w_k, it = chaplygin_step_stats(params, qs[k - 1], qs[k], ws[k - 1], h)
        except (NoConvergence, SingularMatrix) as exc:
            raise StepFailed(
                k, exc, _assemble_chaplygin(params, qs, ws, iters, h, diagnostics)
            ) from exc
        qs.append(q_next)
        ws.append(w_k)
        iters.append(it)
    return _assemble_chaplygin(params, qs, ws, iters, h, diagnostics)


def _assemble_chaplygin(params, qs, ws, iters, h, diagnostics=True) -> Trajectory:
    inertia = params.inertia
    n_rows = len(ws)
    states: list = []
    energies = np.empty(n_rows)
    residuals = np.zeros(n_rows)
    for k in range(n_rows):
        states.append(np.concatenate([qs[k], ws[k]]))
        if k == 0:
            v = (qs[1] - qs[0]) / h
        else:
            v = (qs[k + 1] - qs[k - 1]) / (2.0 * h)
            if diagnostics:
                residuals[k] = _inf_norm(
                    chaplygin_scheme_residual(
                        params, qs[k - 1], qs[k], qs[k + 1], ws[k - 1], ws[k], h
                    )
                )
        energies[k] = 0.5 * params.m * float(v @ v) + 0.5 * float(
            ws[k] @ (inertia * ws[k])
        )
    return Trajectory(
        times=h * np.arange(n_rows),
        states=states,
        energies=energies,
        residuals=residuals,
        newton_iters=np.asarray(iters[:n_rows], dtype=int),
        h=h,
    )


# ---------------------------------------------------------------------------
# state channels


def _position_of(state) -> np.ndarray:
    if isinstance(state, PhaseState):
        return state.q
    if isinstance(state, ReducedState):
        return state.x
    return np.asarray(state)[:2]  # rolling-sphere row [x, y, w1, w2, w3]


def _velocity_of(system, state) -> np.ndarray:
    if isinstance(state, PhaseState):
        return system.mass_inv @ state.p
    if isinstance(state, ReducedState):
        return state.xi
    return np.asarray(state)[2:]


def _final_energy(system, traj: Trajectory) -> float:
    """Energy at the final node.

    Rolling-sphere rows carry interval angular velocities that sample half
    a step past the node, which would bias the energy comparison at first
    order in h; the final-node value therefore re-centers the rotational
    term with the average of the last two interval velocities.
    """
    if isinstance(system, ChaplyginParams) and len(traj) >= 2:
        inertia = system.inertia
        w_last = np.asarray(traj.states[-1])[2:]
        w_bar = 0.5 * (np.asarray(traj.states[-2])[2:] + w_last)
        return (
            traj.energies[-1]
            - 0.5 * float(w_last @ (inertia * w_last))
            + 0.5 * float(w_bar @ (inertia * w_bar))
        )
    return float(traj.energies[-1])


# ---------------------------------------------------------------------------
# convergence


def slope_fit(h_values, errors) -> Tuple[float, float]:
    """Least-squares slope of log(error) against log(h).

    Returns ``(slope, residual)`` where ``residual`` is the RMS deviation
    of the log errors from the fitted line.

    Raises
    ------
    BelowNoiseFloor
        If any error is at or below 1e-14, where rounding noise dominates.
    ValueError
        For fewer than 3 points or mismatched lengths.
    """
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size != e.size:
        raise ValueError("h_values and errors must have equal length")
    if h.size < 3:
        raise ValueError("slope fitting needs at least 3 points")
    if np.any(e <= _NOISE_FLOOR):
        raise BelowNoiseFloor(
            f"smallest error {np.min(e):.3e} is at the rounding noise floor"
        )
    log_h = np.log(h)
    log_e = np.log(e)
    design = np.stack([log_h, np.ones_like(log_h)], axis=1)
    coef, *_ = np.linalg.lstsq(design, log_e, rcond=None)
    residual = float(np.sqrt(np.mean((log_e - design @ coef) ** 2)))
    return float(coef[0]), residual


def _resolve_reference(stepper, system, initial, T, h_min, reference) -> Trajectory:
    if isinstance(reference, Trajectory):
        if reference.h > h_min / 30.0 * (1.0 + 1e-12):
            raise ValueError(
                f"reference step {reference.h} exceeds min(h)/30 = {h_min / 30.0}"
            )
        if abs(float(reference.times[-1]) - T) > max(reference.h, 1e-9):
            raise ValueError("reference trajectory does not end at T")
        return reference
    if isinstance(reference, (int, float)):
        mode, h_ref = "self", float(reference)
    else:
        mode, h_ref = reference
        h_ref = float(h_ref)
    if h_ref > h_min / 30.0 * (1.0 + 1e-12):
        raise ValueError(f"reference step {h_ref} exceeds min(h)/30 = {h_min / 30.0}")
    n_ref = max(1, int(round(T / h_ref)))
    if mode == "self":
        if isinstance(system, ChaplyginParams):
            return _run_chaplygin(system, initial, T / n_ref, n_ref, diagnostics=False)
        return run(stepper, system, initial, T / n_ref, n_ref)
    if mode == "rk4":
        if isinstance(system, ChaplyginParams):
            raise ValueError(
                "no continuous-reference integrator for the rolling-sphere "
                "recurrence; use a self-convergence reference"
            )
        return model.reference_solve(system, initial, T, h_ref, record_every=n_ref)
    raise ValueError(f"unknown reference mode {mode!r}; use 'self' or 'rk4'")


def convergence_sweep(
    stepper, system, initial, T: float, h_list, reference
) -> ConvergenceReport:
    """Measure final-time errors against a reference over step sizes.

    ``h_list`` must be strictly decreasing with at least 3 entries, each
    dividing ``T`` to within one step (the step actually used is
    ``T/round(T/h)`` so every run lands exactly on ``T``).  ``reference``
    is a precomputed :class:`Trajectory`, a bare step size (meaning
    self-convergence: the same stepper at that step), or a pair
    ``("self" | "rk4", h_ref)``; in every case the reference step must be
    at most ``min(h_list)/30``.  Errors are infinity norms at the final
    time on position and velocity (body angular velocity for reduced and
    rolling-sphere runs) plus the absolute final-energy difference; slopes
    are least-squares fits on the log-log points, with channels at rounding
    level reported in ``noise_floor`` instead of fitted.
    """
    h_arr = [float(x) for x in h_list]
    if len(h_arr) < 3:
        raise ValueError("convergence sweeps need at least 3 step sizes")
    if any(b >= a for a, b in zip(h_arr, h_arr[1:])):
        raise ValueError("step sizes must be strictly decreasing")
    counts = []
    for h in h_arr:
        n = int(round(T / h))
        if n < 1 or abs(n * h - T) > h:
            raise ValueError(f"h={h} does not divide T={T} to within one step")
        counts.append(n)

    ref_traj = _resolve_reference(stepper, system, initial, T, h_arr[-1], reference)
    ref_final = ref_traj.final
    ref_pos = _position_of(ref_final)
    ref_vel = _velocity_of(system, ref_final)
    ref_energy = _final_energy(system, ref_traj)

    used_h = []
    errs = {ch: [] for ch in CHANNELS}
    for n in counts:
        h_used = T / n
        traj = run(stepper, system, initial, h_used, n)
        used_h.append(h_used)
        errs["position"].append(_inf_norm(_position_of(traj.final) - ref_pos))
        errs["velocity"].append(_inf_norm(_velocity_of(system, traj.final) - ref_vel))
        errs["energy"].append(abs(_final_energy(system, traj) - ref_energy))

    slopes: Dict[str, Tuple[float, float]] = {}
    floor: Set[str] = set()
    for ch in CHANNELS:
        try:
            slopes[ch] = slope_fit(used_h, errs[ch])
        except BelowNoiseFloor:
            floor.add(ch)
    return ConvergenceReport(
        h_values=np.array(used_h),
        errors={ch: np.array(errs[ch]) for ch in CHANNELS},
        slopes=slopes,
        noise_floor=floor,
    )


# ---------------------------------------------------------------------------
# adjointness and state sampling


def adjoint_check(step_a, step_b, states: Sequence[PhaseState], h: float) -> float:
    """Largest composition defect ``||step_b(step_a(s, h), -h) - s||_inf``.

    ``step_a`` and ``step_b`` are one-step maps with the system bound,
    i.e. callables ``(state, h) -> state``.  A mutually adjoint pair (or a
    self-adjoint method passed twice) returns zero up to solver tolerance.
    """
    from .gni_flat import state_difference

    worst = 0.0
    for s in states:
        roundtrip = step_b(step_a(s, h), -h)
        worst = max(worst, state_difference(roundtrip, s))
    return worst


def sample_admissible_states(
    system,
    count: int,
    seed: int,
    h: float = 0.1,
    scheme: str = "continuous",
    box: float = 1.0,
):
    """Draw ``count`` admissible states: configurations uniform in
    ``[-box, box]^n``, Gaussian velocities projected onto the admissible
    set by the named scheme's own constraint form (see
    :func:`gni.gni_flat.prepare_state`)."""
    from .gni_flat import prepare_state

    rng = np.random.default_rng(seed)
    states = []
    for _ in range(count):
        q = rng.uniform(-box, box, size=system.dim)
        v = rng.standard_normal(system.dim)
        states.append(prepare_state(system, q, v, scheme=scheme, h=h))
    return states


# ---------------------------------------------------------------------------
# invariant suites


def _result(label: str, passed: bool, detail: str):
    return (label, bool(passed), detail)


def _bound_result(label, value, bound):
    return _result(label, value <= bound, f"max defect {value:.3e} (tol {bound:.1e})")


def _window_result(label, value, lo, hi):
    return _result(label, lo <= value <= hi, f"slope {value:.3f} (window [{lo}, {hi}])")


def _suite_lie(seed: int):
    from .lie_so3 import Ad, Ad_star, cay, dcay, dcay_inv, exp_so3, hat, vee

    rng = np.random.default_rng(seed)
    eye = np.eye(3)
    defects = {
        "hat/vee round trip": 0.0,
        "hat cross action": 0.0,
        "cay orthogonality": 0.0,
        "cay inverse at -w": 0.0,
        "tangent maps mutually inverse": 0.0,
        "exp orthogonality": 0.0,
        "exp inverse at -w": 0.0,
        "Ad matrix conjugation": 0.0,
        "Ad / Ad_star duality": 0.0,
    }
    for _ in range(100):
        w = rng.uniform(-1.5, 1.5, size=3)
        u = rng.standard_normal(3)
        m = rng.standard_normal(3)
        r_cay, r_exp = cay(w), exp_so3(w)
        defects["hat/vee round trip"] = max(
            defects["hat/vee round trip"], _inf_norm(vee(hat(w)) - w)
        )
        defects["hat cross action"] = max(
            defects["hat cross action"], _inf_norm(hat(w) @ u - np.cross(w, u))
        )
        defects["cay orthogonality"] = max(
            defects["cay orthogonality"],
            _inf_norm(r_cay.T @ r_cay - eye),
            abs(np.linalg.det(r_cay) - 1.0),
        )
        defects["cay inverse at -w"] = max(
            defects["cay inverse at -w"], _inf_norm(r_cay @ cay(-w) - eye)
        )
        defects["tangent maps mutually inverse"] = max(
            defects["tangent maps mutually inverse"],
            _inf_norm(dcay_inv(w) @ dcay(w) - eye),
        )
        defects["exp orthogonality"] = max(
            defects["exp orthogonality"],
            _inf_norm(r_exp.T @ r_exp - eye),
            abs(np.linalg.det(r_exp) - 1.0),
        )
        defects["exp inverse at -w"] = max(
            defects["exp inverse at -w"], _inf_norm(r_exp @ exp_so3(-w) - eye)
        )
        defects["Ad matrix conjugation"] = max(
            defects["Ad matrix conjugation"],
            _inf_norm(hat(Ad(r_cay, u)) - r_cay @ hat(u) @ r_cay.T),
        )
        defects["Ad / Ad_star duality"] = max(
            defects["Ad / Ad_star duality"],
            abs(float(Ad(r_cay, u) @ m) - float(u @ Ad_star(r_cay, m))),
        )
    return [_bound_result(f"lie: {k}", v, 1e-12) for k, v in defects.items()]


def _projector_defect(metric, p_mat, q_mat, rows) -> float:
    n = p_mat.shape[0]
    return max(
        _inf_norm(p_mat + q_mat - np.eye(n)),
        _inf_norm(p_mat @ p_mat - p_mat),
        _inf_norm(q_mat @ q_mat - q_mat),
        _inf_norm(p_mat @ q_mat),
        _inf_norm(rows @ p_mat),
        _inf_norm(p_mat.T @ metric @ q_mat),
    )


def _suite_projectors(seed: int):
    from .gni_reduced import chaplygin_reduced_system

    rng = np.random.default_rng(seed)
    results = []
    flat_systems = [
        ("particle", model.nonholonomic_particle("harmonic")),
        ("planar affine", model.constrained_2d(affine=(0.3, -0.1))),
    ]
    for name, sys in flat_systems:
        worst = 0.0
        for _ in range(100):
            q = rng.uniform(-2.0, 2.0, size=sys.dim)
            p_mat, q_mat = model.projectors(sys, q)
            worst = max(
                worst,
                _projector_defect(sys.mass_matrix, p_mat, q_mat, sys.constraint_matrix(q)),
            )
        results.append(_bound_result(f"projectors: {name} algebra", worst, 1e-12))

    sphere_cases = [
        ("homogeneous sphere", ChaplyginParams(1.0, 1.0, 0.0, 2 / 3, 2 / 3, 2 / 3)),
        ("unbalanced sphere", ChaplyginParams(3.0, 1.0, 0.2, 1.0, 1.1, 1.2)),
    ]
    for name, params in sphere_cases:
        rsys = chaplygin_reduced_system(params)
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-2.0, 2.0, size=2)
            p_mat, q_mat = model.reduced_projectors(rsys, x)
            worst = max(
                worst,
                _projector_defect(
                    rsys.bundle_metric, p_mat, q_mat, rsys.annihilator_matrix(x)
                ),
            )
        results.append(_bound_result(f"projectors: {name} algebra", worst, 1e-12))

    homog = chaplygin_reduced_system(sphere_cases[0][1])
    p_mat, q_mat = model.reduced_projectors(homog, np.zeros(2))
    hand = max(
        abs(q_mat[0, 0] - 0.4), abs(q_mat[0, 3] + 0.4), abs(p_mat[4, 4] - 1.0)
    )
    results.append(_bound_result("projectors: sphere closed-form entries", hand, 1e-12))
    return results


def _mini_sweep(stepper, system, initial, T, h_list, channel="position"):
    report = convergence_sweep(stepper, system, initial, T, h_list, h_list[-1] / 30.0)
    return report.slopes[channel][0]


def _suite_steppers(seed: int):
    from . import gni_flat, gni_reduced

    results = []
    sys = model.nonholonomic_particle("harmonic")
    h = 0.1
    states = sample_admissible_states(sys, 5, seed, h=h)

    worst = 0.0
    for stepper in (gni_flat.euler_a_step, gni_flat.euler_b_step, gni_flat.rattle_step):
        for s in states:
            worst = max(worst, gni_flat.state_difference(stepper(sys, s, 0.0), s))
    results.append(_bound_result("steppers: zero-step identity", worst, 1e-14))

    s = gni_flat.prepare_state(sys, [0.3, 0.2, 0.1], [1.0, 0.5, 0.2], scheme="rattle", h=0.01)
    positions = [s.q.copy()]
    for _ in range(50):
        s = gni_flat.rattle_step(sys, s, 0.01)
        positions.append(s.q.copy())
    ld = gni_flat.verlet_lagrangian(sys)
    worst = 0.0
    q_prev, q_curr = positions[0], positions[1]
    for k in range(2, 51):
        q_next = gni_flat.gni_generic_step(ld, sys, q_prev, q_curr, 0.01)
        worst = max(worst, _inf_norm(q_next - positions[k]))
        q_prev, q_curr = q_curr, q_next
    results.append(
        _bound_result("steppers: generic scheme reproduces midpoint positions", worst, 1e-10)
    )

    initial = gni_flat.prepare_state(sys, [0.3, 0.2, 0.1], [1.0, 0.5, 0.2])
    grid = [0.1, 0.05, 0.025]
    results.append(
        _window_result(
            "steppers: one-sided scheme position order",
            _mini_sweep(gni_flat.euler_a_step, sys, initial, 1.0, grid),
            0.8,
            1.2,
        )
    )
    results.append(
        _window_result(
            "steppers: symmetric scheme position order",
            _mini_sweep(gni_flat.rattle_step, sys, initial, 1.0, grid),
            1.8,
            2.2,
        )
    )
    results.append(
        _window_result(
            "steppers: half-step composition order",
            _mini_sweep(gni_flat.composed_euler_step, sys, initial, 1.0, grid),
            1.8,
            2.2,
        )
    )

    params = ChaplyginParams(m=3.0, r=1.0, omega=0.2, i1=1.0, i2=1.1, i3=1.2)
    rsys = gni_reduced.chaplygin_reduced_system(params)
    rld = gni_reduced.standard_retracted_lagrangian(rsys)
    hc = 1e-3
    q0 = np.array([1.0, 0.0])
    w0 = np.array([-0.2, 0.0, 0.4])
    rstate = gni_reduced.chaplygin_initial_reduced_state(params, q0, w0, hc)
    qs = [q0, gni_reduced.chaplygin_init(params, q0, w0, hc)]
    ws = [w0]
    worst = 0.0
    for k in range(1, 6):
        qn, wn = gni_reduced.chaplygin_step(params, qs[k - 1], qs[k], ws[k - 1], hc)
        qs.append(qn)
        ws.append(wn)
        rstate = gni_reduced.reduced_rattle_step(rsys, rld, rstate, hc)
        worst = max(worst, _inf_norm(rstate.x - qs[k]), _inf_norm(rstate.xi - wn))
    results.append(
        _bound_result(
            "steppers: reduced scheme matches rolling-sphere solver", worst, 10 * hc * hc
        )
    )

    homog = ChaplyginParams(m=1.0, r=1.0, omega=1.0, i1=2 / 3, i2=2 / 3, i3=2 / 3)
    hr = gni_reduced.chaplygin_reduced_system(homog)
    hl = gni_reduced.standard_retracted_lagrangian(hr)
    rstate = gni_reduced.chaplygin_initial_reduced_state(
        homog, np.array([1.0, 1.0]), np.array([0.0, 2.0, 0.0]), 0.1
    )
    worst = 0.0
    for _ in range(20):
        nxt = gni_reduced.reduced_rattle_step(hr, hl, rstate, 0.1)
        worst = max(worst, _inf_norm(gni_reduced.reduced_scheme_residual(hr, rstate, nxt, 0.1)))
        rstate = nxt
    results.append(
        _bound_result("steppers: reduced discrete constraint residual", worst, 1e-10)
    )

    traj = run(None, homog, (np.array([1.0, 1.0]), np.array([0.0, 2.0, 0.0])), 0.1, 200)
    results.append(
        _bound_result(
            "steppers: rolling-sphere discrete constraint residual",
            float(np.max(traj.residuals)),
            1e-10,
        )
    )

    report = convergence_sweep(
        None,
        homog,
        (np.array([1.0, 1.0]), np.array([0.0, 2.0, 0.0])),
        2.0,
        grid,
        grid[-1] / 30.0,
    )
    results.append(
        _window_result(
            "steppers: homogeneous-sphere energy order",
            report.slopes["energy"][0],
            1.7,
            2.3,
        )
    )
    return results


def _suite_adjoint(seed: int):
    from . import gni_flat

    results = []
    cases = [
        ("particle", model.nonholonomic_particle("harmonic")),
        ("planar affine", model.constrained_2d(affine=(0.3, -0.1))),
    ]
    h = 0.1
    for name, sys in cases:
        def a_step(s, hh, sys=sys):
            return gni_flat.euler_a_step(sys, s, hh)

        def b_step(s, hh, sys=sys):
            return gni_flat.euler_b_step(sys, s, hh)

        def r_step(s, hh, sys=sys):
            return gni_flat.rattle_step(sys, s, hh)

        states_a = sample_admissible_states(sys, 50, seed, h=h, scheme="euler_a")
        states_b = sample_admissible_states(sys, 50, seed + 1, h=h, scheme="euler_b")
        states_r = sample_admissible_states(sys, 50, seed + 2, h=h, scheme="rattle")
        results.append(
            _bound_result(
                f"adjoint: {name} one-sided pair (A then B)",
                adjoint_check(a_step, b_step, states_a, h),
                1e-9,
            )
        )
        results.append(
            _bound_result(
                f"adjoint: {name} one-sided pair (B then A)",
                adjoint_check(b_step, a_step, states_b, h),
                1e-9,
            )
        )
        results.append(
            _bound_result(
                f"adjoint: {name} symmetric scheme self-adjointness",
                adjoint_check(r_step, r_step, states_r, h),
                1e-9,
            )
        )
    return results


_SUITE_FUNCTIONS = {
    "lie": _suite_lie,
    "projectors": _suite_projectors,
    "steppers": _suite_steppers,
    "adjoint": _suite_adjoint,
}


def check_suite(suite: str = "all", seed: int = 0, quiet: bool = False):
    """Execute an invariant battery and return ``(label, passed, detail)``
    triples.

    ``suite`` is one of ``"lie"``, ``"projectors"``, ``"steppers"``,
    ``"adjoint"``, or ``"all"``.  Every battery is deterministic given
    ``seed`` (the "all" run equals the concatenation of the individual
    suites at the same seed).  Unless ``quiet``, one line per check is
    printed as it completes.
    """
    if suite == "all":
        names = tuple(_SUITE_FUNCTIONS)
    elif suite in _SUITE_FUNCTIONS:
        names = (suite,)
    else:
        raise ValueError(
            f"unknown suite {suite!r}; choose from {sorted(_SUITE_FUNCTIONS)} or 'all'"
        )
    results = []
    for name in names:
        for label, passed, detail in _SUITE_FUNCTIONS[name](seed):
            if not quiet:
                print(f"{'ok  ' if passed else 'FAIL'} {label}: {detail}")
            results.append((label, passed, detail))
    return results
