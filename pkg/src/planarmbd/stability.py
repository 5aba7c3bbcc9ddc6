"""Linear stability analysis for the Newmark family.

The single-degree-of-freedom amplification matrix maps the scaled state
(dt^2 xdd, dt xd, x) across one step; its spectral radius must not exceed 1
for a stable integration. For beta < alpha/2 the oscillatory-mode bound
yields the stepsize limit dt <= (1/omega) sqrt(1 / (alpha/2 - beta)); for
beta >= alpha/2 no finite limit exists.

The amplification matrix is constructed by solving the three defining
equations (equilibrium at the end of the step plus the two Newmark
updates) as a linear map, rather than transcribing a closed-form matrix;
the closed form is recovered in the tests.
"""

from dataclasses import dataclass

import numpy as np

from . import model as _model
from . import tangent as _tangent
from .linsolve import max_generalized_frequency


@dataclass
class StabilityReport:
    """Frequency and stepsize-limit summary, optionally with a timeline."""

    omega_max: float
    dt_limit: float
    params: object
    timeline: list = None     # (t, omega_max, dt_limit) tuples when attached


def sdof_amplification_matrix(omega, xi, dt, params):
    """Newmark amplification matrix of xdd + 2 xi omega xd + omega^2 x = 0.

    Maps (dt^2 xdd, dt xd, x) at t to the same quantities at t + dt.
    """
    if omega < 0.0 or xi < 0.0 or dt <= 0.0:
        raise ValueError("require omega >= 0, xi >= 0, dt > 0")
    a, b = params.alpha, params.beta
    wdt = omega * dt
    # rows: equilibrium at t+dt, velocity update, position update,
    # unknowns/inputs ordered (dt^2 xdd, dt xd, x)
    lhs = np.array([
        [1.0, 2.0 * xi * wdt, wdt * wdt],
        [-a, 1.0, 0.0],
        [-b, 0.0, 1.0],
    ])
    rhs = np.array([
        [0.0, 0.0, 0.0],
        [1.0 - a, 1.0, 0.0],
        [0.5 - b, 1.0, 1.0],
    ])
    return np.linalg.solve(lhs, rhs)


def spectral_radius(a):
    """Largest eigenvalue magnitude (complex eigenvalues included)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("spectral radius requires a square matrix")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    return float(np.abs(np.linalg.eigvals(a)).max())


def newmark_dt_limit(omega_max, params):
    """Largest stable stepsize for the highest natural frequency.

    Infinite for beta >= alpha/2 (unconditionally stable configurations)
    and for a system without oscillatory modes (omega_max = 0).
    """
    if omega_max < 0.0:
        raise ValueError("omega_max must be >= 0")
    margin = 0.5 * params.alpha - params.beta
    if margin <= 0.0 or omega_max == 0.0:
        return float("inf")
    return float(np.sqrt(1.0 / margin) / omega_max)


def reduced_frequency(model, state):
    """Highest natural frequency of the tangent-reduced system at a state."""
    frame = _tangent.build_tangent_frame(model, state.x, state.xdot, state.xddot)
    m_lin, c_lin, k_lin, f_lin = _model.linearize_equilibrium(model, state)
    m_red, _, k_red, _ = _tangent.reduce_equilibrium(frame, m_lin, c_lin, k_lin, f_lin)
    return max_generalized_frequency(k_red, m_red)


def trajectory_frequency_timeline(model, trajectory):
    """Per-record highest reduced natural frequency along a trajectory."""
    return [reduced_frequency(model, record.state) for record in trajectory.records]
