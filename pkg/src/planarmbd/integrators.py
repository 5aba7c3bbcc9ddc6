"""Time-stepping engines and the trajectory driver.

Four steppers share the Newmark parameter family (alpha, beta):

* ``step_tangent_newmark`` -- implicit Newmark on the per-iteration tangent
  chart (the null-space method); converged steps satisfy position, velocity
  and acceleration constraints simultaneously.
* ``step_classical_index3`` -- implicit Newmark on the augmented
  (coordinates + multipliers) system enforcing position constraints only.
* ``step_central_difference`` -- explicit central differences on an
  unconstrained/minimal form, written as the algebraically equivalent
  one-state-in, one-state-out update (including the half-acceleration
  start).
* ``step_newmark_minimal`` -- Newton-iterated Newmark on an
  unconstrained/minimal form.

``simulate`` drives any of them, records per-step diagnostics and converts
step failures and state blow-up into a Diverged trajectory status instead
of propagating exceptions.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import model as _model
from . import tangent as _tangent
from .errors import SingularMassError, StepDivergenceError
from .linsolve import DEFAULT_RANK_TOL, max_generalized_frequency

TANGENT_NEWMARK = "tangent-newmark"
CLASSICAL_INDEX3 = "classical-index3"
CENTRAL_DIFFERENCE = "central-difference"
NEWMARK_MINIMAL = "newmark-minimal"
METHODS = (TANGENT_NEWMARK, CLASSICAL_INDEX3, CENTRAL_DIFFERENCE, NEWMARK_MINIMAL)


@dataclass(frozen=True)
class NewmarkParams:
    """Newmark integrator parameters (velocity weight alpha, position weight beta)."""

    alpha: float = 0.5
    beta: float = 0.25

    def __post_init__(self):
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("Newmark parameters must be >= 0")


FOX_GOODWIN = NewmarkParams(0.5, 1.0 / 12.0)
TRAPEZOIDAL = NewmarkParams(0.5, 0.25)
TUNED = NewmarkParams(0.5001, 0.2507)


@dataclass(frozen=True)
class StepConfig:
    """Stepsize and convergence control for the implicit steppers."""

    dt: float
    tol: float = 1e-10
    constraint_tol: float = 1e-10
    max_iters: int = 50
    blowup: float = 1e6
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if not self.tol > 0.0 or not self.constraint_tol > 0.0:
            raise ValueError("tolerances must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class StepRecord:
    """Converged state of one step plus the recorded diagnostics."""

    state: _model.SystemState
    iterations: int
    q_norm: float
    qdot_norm: float
    qddot_norm: float
    energy: float
    omega_max: float = None


@dataclass
class Trajectory:
    """Ordered step records with the overall run status."""

    records: list
    status: str                  # "converged" or "diverged"
    method: str
    wall_time: float
    failure: str = None

    @property
    def final_state(self):
        return self.records[-1].state

    def times(self):
        return np.array([r.state.t for r in self.records])

    def coordinate(self, i):
        return np.array([r.state.x[i] for r in self.records])


# --------------------------------------------------------------------------
# minimal / unconstrained systems
# --------------------------------------------------------------------------

@dataclass
class MinimalSystem:
    """Unconstrained second-order system M xdd = f(t, x, xd).

    ``force_jacobians(t, x, xd) -> (df/dx, df/dxd)`` may be omitted, in
    which case the implicit stepper falls back to central finite
    differences. ``energy(x, xd)`` is optional and only used for trajectory
    records.
    """

    mass: np.ndarray
    force: callable
    force_jacobians: callable = None
    energy: callable = None
    labels: tuple = ()

    def __post_init__(self):
        self.mass = np.atleast_2d(np.asarray(self.mass, dtype=float))

    @property
    def n(self):
        return self.mass.shape[0]

    def linearize(self, t, x, xdot):
        f0 = self.force(t, x, xdot)
        if self.force_jacobians is not None:
            dfdx, dfdv = self.force_jacobians(t, x, xdot)
        else:
            n = self.n
            dfdx = np.empty((n, n))
            dfdv = np.empty((n, n))
            for i in range(n):
                h = 1e-7 * (1.0 + abs(x[i]))
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                dfdx[:, i] = (self.force(t, xp, xdot) - self.force(t, xm, xdot)) / (2 * h)
                h = 1e-7 * (1.0 + abs(xdot[i]))
                vp, vm = xdot.copy(), xdot.copy()
                vp[i] += h
                vm[i] -= h
                dfdv[:, i] = (self.force(t, x, vp) - self.force(t, x, vm)) / (2 * h)
        return f0, dfdx, dfdv

    @classmethod
    def from_model(cls, model):
        """Wrap a joint-free multibody model as a minimal system."""
        if model.n_constraints:
            raise ValueError("only joint-free models reduce to a minimal system")
        return cls(
            mass=_model.mass_matrix(model),
            force=lambda t, x, v: _model._forces(model, t, x, v),
            force_jacobians=lambda t, x, v: _model._force_jacobians(model, t, x, v),
            energy=lambda x, v: _model._energy(model, x, v),
            labels=tuple(b.name for b in model.bodies),
        )


def consistent_minimal_state(system, x, xdot, t=0.0):
    """Initial state with the acceleration solved from the equations of motion."""
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    xddot = np.linalg.solve(system.mass, system.force(t, x, xdot))
    return _model.SystemState(t, x, xdot, xddot)


# --------------------------------------------------------------------------
# Newmark kinematics
# --------------------------------------------------------------------------

def newmark_kinematics(state_t, xddot_next, params, dt):
    """End-of-step position and velocity from the Newmark update family."""
    a0, a1 = state_t.xddot, xddot_next
    xdot = state_t.xdot + dt * ((1.0 - params.alpha) * a0 + params.alpha * a1)
    x = state_t.x + dt * state_t.xdot + dt * dt * ((0.5 - params.beta) * a0
                                                   + params.beta * a1)
    return x, xdot


def _predictors(state_t, params, dt):
    """Constant-acceleration start: Newmark predictors with xdd held at t."""
    x_pred = state_t.x + dt * state_t.xdot + (0.5 - params.beta) * dt * dt * state_t.xddot
    v_pred = state_t.xdot + (1.0 - params.alpha) * dt * state_t.xddot
    return x_pred, v_pred


def _require_finite(arr, what, iterations, residuals):
    if not np.isfinite(arr).all():
        raise StepDivergenceError(f"{what} became non-finite", iterations, residuals)


# --------------------------------------------------------------------------
# tangent-space Newmark (the null-space method)
# --------------------------------------------------------------------------

def step_tangent_newmark(model, state_t, params, cfg,
                         frame_builder=_tangent.build_tangent_frame):
    """One implicit Newmark step on the per-iteration tangent chart.

    Every iteration rebuilds the constraint linearization at the current
    end-of-step estimate, projects the old state into the chart, reduces
    the linearized equilibrium and solves a k x k Newmark system for the
    chart accelerations. Converged steps satisfy the nonlinear constraints
    at position, velocity and acceleration level simultaneously.

    Expects ``state_t`` to be consistent (constraint residuals at the level
    of the convergence tolerances).
    """
    dt = cfg.dt
    alpha, beta = params.alpha, params.beta
    t1 = state_t.t + dt

    x = state_t.x + dt * state_t.xdot + 0.5 * dt * dt * state_t.xddot
    v = state_t.xdot + dt * state_t.xddot
    acc = state_t.xddot
    lam = state_t.lam
    residuals = {}

    for iteration in range(1, cfg.max_iters + 1):
        frame = frame_builder(model, x, v, acc, cfg.rank_tol)
        a_t, ad_t, add_t = _tangent.project_state(
            frame, state_t.x, state_t.xdot, state_t.xddot)
        m_lin, c_lin, k_lin, f_lin = _model._linearize(model, t1, x, v, lam)
        m_red, c_red, k_red, f_red = _tangent.reduce_equilibrium(
            frame, m_lin, c_lin, k_lin, f_lin)

        a_pred = a_t + dt * ad_t + (0.5 - beta) * dt * dt * add_t
        ad_pred = ad_t + (1.0 - alpha) * dt * add_t
        lhs = m_red + (alpha * dt) * c_red + (beta * dt * dt) * k_red
        rhs = f_red - c_red @ ad_pred - k_red @ a_pred
        try:
            add_new = np.linalg.solve(lhs, rhs) if lhs.size else np.zeros(0)
        except np.linalg.LinAlgError as exc:
            raise StepDivergenceError(
                f"tangent step: singular reduced Newmark system ({exc})",
                iteration, residuals) from exc

        a_new = a_pred + beta * dt * dt * add_new
        ad_new = ad_pred + alpha * dt * add_new
        x_new = _tangent.reconstruct_position(frame, a_new)
        v_new = _tangent.reconstruct_velocity(frame, a_new, ad_new)
        acc_new = _tangent.reconstruct_acceleration(frame, a_new, ad_new, add_new)
        _require_finite(x_new, "tangent step state", iteration, residuals)

        dx = np.abs(x_new - x).max() if x.size else 0.0
        x, v, acc = x_new, v_new, acc_new
        lam = frame.solver.solve_transpose(
            model._mass_diag * acc - _model._forces(model, t1, x, v))

        q = _model.constraints(model, x)
        q_inf = np.abs(q).max() if q.size else 0.0
        residuals = {"dx": float(dx), "q_inf": float(q_inf)}
        if dx <= cfg.tol * (1.0 + np.abs(x).max()) and q_inf <= cfg.constraint_tol:
            state = _model.SystemState(t1, x, v, acc, lam)
            state.lam = _model.recover_multipliers(model, state)
            return state, iteration

    raise StepDivergenceError(
        f"tangent step did not converge in {cfg.max_iters} iterations",
        cfg.max_iters, residuals)


# --------------------------------------------------------------------------
# classical augmented index-3 Newmark
# --------------------------------------------------------------------------

def step_classical_index3(model, state_t, params, cfg):
    """One implicit Newmark step on the augmented (x, lam) system.

    Position constraints only are enforced (pure index-3 choice); velocity
    and acceleration constraint violations are observable in the returned
    state. Divergence here is expected behavior for parameter choices the
    stability analysis rejects.
    """
    if params.beta <= 0.0:
        raise ValueError("classical index-3 stepping requires beta > 0")
    dt = cfg.dt
    alpha, beta = params.alpha, params.beta
    t1 = state_t.t + dt
    n, m = model.n_coords, model.n_constraints

    x_pred, v_pred = _predictors(state_t, params, dt)
    inv_bdt2 = 1.0 / (beta * dt * dt)
    vel_fac = alpha / (beta * dt)

    x = x_pred + beta * dt * dt * state_t.xddot
    lam = state_t.lam if state_t.lam.size == m else np.zeros(m)
    residuals = {}

    for iteration in range(1, cfg.max_iters + 1):
        acc = (x - x_pred) * inv_bdt2
        v = v_pred + alpha * dt * acc
        m_lin, c_lin, k_lin, f_lin = _model._linearize(model, t1, x, v, lam)
        h = _model.constraint_jacobian(model, x)
        b_lin = h @ x - _model.constraints(model, x)

        aug = np.zeros((n + m, n + m))
        aug[:n, :n] = inv_bdt2 * m_lin + vel_fac * c_lin + k_lin
        aug[:n, n:] = -h.T
        aug[n:, :n] = h
        rhs = np.concatenate([
            f_lin + m_lin @ (inv_bdt2 * x_pred) + c_lin @ (vel_fac * x_pred - v_pred),
            b_lin,
        ])
        try:
            sol = np.linalg.solve(aug, rhs)
        except np.linalg.LinAlgError as exc:
            raise StepDivergenceError(
                f"classical step: singular augmented system ({exc})",
                iteration, residuals) from exc
        _require_finite(sol, "classical step state", iteration, residuals)

        dx = np.abs(sol[:n] - x).max()
        x, lam = sol[:n], sol[n:]
        q = _model.constraints(model, x)
        q_inf = np.abs(q).max() if q.size else 0.0
        residuals = {"dx": float(dx), "q_inf": float(q_inf)}
        if dx <= cfg.tol * (1.0 + np.abs(x).max()) and q_inf <= cfg.constraint_tol:
            acc = (x - x_pred) * inv_bdt2
            v = v_pred + alpha * dt * acc
            return _model.SystemState(t1, x, v, acc, lam), iteration

    raise StepDivergenceError(
        f"classical step did not converge in {cfg.max_iters} iterations",
        cfg.max_iters, residuals)


# --------------------------------------------------------------------------
# minimal-coordinate steppers
# --------------------------------------------------------------------------

def step_central_difference(system, state_t, dt):
    """One explicit central-difference step on a minimal system.

    Written in one-step (state in, state out) form, which reproduces the
    three-point position recurrence exactly, including the
    half-acceleration first step. Velocity-dependent forces are evaluated
    with the explicitly predicted end velocity.
    """
    t1 = state_t.t + dt
    x1 = state_t.x + dt * state_t.xdot + 0.5 * dt * dt * state_t.xddot
    _require_finite(x1, "central-difference position", 1, {})
    v_guess = state_t.xdot + dt * state_t.xddot
    with np.errstate(over="ignore", invalid="ignore"):
        f1 = system.force(t1, x1, v_guess)
    _require_finite(f1, "central-difference force", 1, {})
    try:
        a1 = np.linalg.solve(system.mass, f1)
    except np.linalg.LinAlgError as exc:
        raise SingularMassError(
            "central differences requires an invertible mass matrix") from exc
    v1 = state_t.xdot + 0.5 * dt * (state_t.xddot + a1)
    return _model.SystemState(t1, x1, v1, a1), 1


def step_newmark_minimal(system, state_t, params, cfg):
    """One Newton-iterated Newmark step on a minimal system."""
    dt = cfg.dt
    alpha, beta = params.alpha, params.beta
    t1 = state_t.t + dt
    x_pred, v_pred = _predictors(state_t, params, dt)

    acc = state_t.xddot.copy()
    x = x_pred + beta * dt * dt * acc
    v = v_pred + alpha * dt * acc
    residuals = {}

    for iteration in range(1, cfg.max_iters + 1):
        f0, dfdx, dfdv = system.linearize(t1, x, v)
        k_lin = -dfdx
        c_lin = -dfdv
        f_lin = f0 + k_lin @ x + c_lin @ v
        lhs = system.mass + (alpha * dt) * c_lin + (beta * dt * dt) * k_lin
        rhs = f_lin - c_lin @ v_pred - k_lin @ x_pred
        try:
            acc = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise StepDivergenceError(
                f"minimal Newmark step: singular system ({exc})",
                iteration, residuals) from exc
        x_new = x_pred + beta * dt * dt * acc
        v_new = v_pred + alpha * dt * acc
        _require_finite(x_new, "minimal Newmark state", iteration, residuals)

        dx = np.abs(x_new - x).max()
        x, v = x_new, v_new
        residuals = {"dx": float(dx)}
        if dx <= cfg.tol * (1.0 + np.abs(x).max()):
            return _model.SystemState(t1, x, v, acc), iteration

    raise StepDivergenceError(
        f"minimal Newmark step did not converge in {cfg.max_iters} iterations",
        cfg.max_iters, residuals)


# --------------------------------------------------------------------------
# trajectory driver
# --------------------------------------------------------------------------

def _record(system, state, iterations, record_frequency):
    if isinstance(system, _model.MultibodyModel):
        q = _model.constraints(system, state.x)
        qd = _model.constraint_velocity(system, state.x, state.xdot)
        qdd = _model.constraint_acceleration(system, state.x, state.xdot, state.xddot)
        energy = _model.mechanical_energy(system, state)
        omega = None
        if record_frequency:
            from .stability import reduced_frequency
            omega = reduced_frequency(system, state)
        return StepRecord(state, iterations,
                          float(np.linalg.norm(q)), float(np.linalg.norm(qd)),
                          float(np.linalg.norm(qdd)), energy, omega)
    energy = system.energy(state.x, state.xdot) if system.energy else float("nan")
    omega = None
    if record_frequency:
        _, dfdx, _ = system.linearize(state.t, state.x, state.xdot)
        omega = max_generalized_frequency(-dfdx, system.mass)
    return StepRecord(state, iterations, 0.0, 0.0, 0.0, energy, omega)


def _resolve(system, method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose one of {METHODS}")
    constrained = method in (TANGENT_NEWMARK, CLASSICAL_INDEX3)
    if isinstance(system, _model.MultibodyModel):
        if not constrained:
            system = MinimalSystem.from_model(system)
    elif isinstance(system, MinimalSystem):
        if constrained:
            raise ValueError(f"method {method!r} requires a multibody model")
    else:
        raise TypeError(f"cannot simulate {type(system).__name__}")
    return system


def simulate(system, method, state0, params, cfg, t_end, record_frequency=False):
    """Integrate from state0 to t_end, capturing one record per step.

    Step failures and state blow-up terminate the run early with status
    "diverged" and the partial trajectory preserved; they never raise.
    """
    if t_end < state0.t:
        raise ValueError("t_end must be >= the initial time")
    system = _resolve(system, method)
    n_steps = int(round((t_end - state0.t) / cfg.dt))

    state = state0
    records = [_record(system, state, 0, record_frequency)]
    status, failure = "converged", None
    start = time.perf_counter()
    for _ in range(n_steps):
        try:
            if method == TANGENT_NEWMARK:
                state, iters = step_tangent_newmark(system, state, params, cfg)
            elif method == CLASSICAL_INDEX3:
                state, iters = step_classical_index3(system, state, params, cfg)
            elif method == CENTRAL_DIFFERENCE:
                state, iters = step_central_difference(system, state, cfg.dt)
            else:
                state, iters = step_newmark_minimal(system, state, params, cfg)
        except StepDivergenceError as exc:
            status, failure = "diverged", str(exc)
            break
        records.append(_record(system, state, iters, record_frequency))
        if np.abs(state.x).max() > cfg.blowup:
            status, failure = "diverged", "state blow-up beyond configured bound"
            break
    wall = time.perf_counter() - start
    return Trajectory(records, status, method, wall, failure)
