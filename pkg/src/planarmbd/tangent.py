"""Per-step tangent chart on the constraint manifold.

Each implicit iteration linearizes the constraints about the current
estimate of the end-of-step state and builds an instantaneous set of
minimal coordinates ``a`` on that linearization. Positions, velocities and
accelerations reconstruct affinely from ``(a, ad, add)``; any chart value
satisfies the linearized constraints at all three levels, so the reduced
system can be integrated as an unconstrained ODE.

Reconstruction map (all matrices built from one factorization of H):

    x   = pos_part + basis a
    xd  = vel_part + basis ad + vel_coupling a
    xdd = acc_part + acc_coupling_pos a + acc_coupling_vel ad + basis add

with acc_coupling_vel = 2 vel_coupling by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model as _model
from .errors import SingularMassError
from .linsolve import DEFAULT_RANK_TOL, SvdSolver, cholesky_pivot_check


@dataclass(eq=False)
class TangentFrame:
    """Affine chart of the constraint linearization at one state estimate."""

    pos_part: np.ndarray          # particular solution, position level
    basis: np.ndarray             # orthonormal null-space basis of H (n x k)
    vel_part: np.ndarray
    vel_coupling: np.ndarray      # n x k, velocity response to chart position
    acc_part: np.ndarray
    acc_coupling_pos: np.ndarray  # n x k
    acc_coupling_vel: np.ndarray  # n x k, equals 2 * vel_coupling
    x0: np.ndarray                # linearization point
    xdot0: np.ndarray
    xddot0: np.ndarray
    solver: SvdSolver = field(repr=False)

    @property
    def dim(self):
        return self.basis.shape[1]


def build_tangent_frame(model, x0, xdot0, xddot0, rank_tol=DEFAULT_RANK_TOL):
    """Chart of the constraint linearization at (x0, xdot0, xddot0).

    All particular solutions are minimal-norm least-squares values and all
    solves share one factorization of H(x0), so redundant (even slightly
    inconsistent) constraint rows are handled gracefully.
    """
    x0 = np.asarray(x0, dtype=float)
    xdot0 = np.asarray(xdot0, dtype=float)
    xddot0 = np.asarray(xddot0, dtype=float)

    h = _model.constraint_jacobian(model, x0)
    hd = _model.jacobian_dot(model, x0, xdot0)
    hdd = _model.jacobian_ddot(model, x0, xdot0, xddot0)
    q0 = _model.constraints(model, x0)

    solver = SvdSolver(h, rank_tol)
    basis = solver.null_space

    # With scleronomic constraints qdot = H xdot and qddot = H xddot + Hdot
    # xdot identically, so those right-hand-side terms cancel exactly and
    # only the linearization-shift terms survive.
    pos_part = solver.solve(h @ x0 - q0)
    vel_part = solver.solve(hd @ (x0 - pos_part))
    vel_coupling = solver.solve(-hd @ basis)
    acc_part = solver.solve(hdd @ (x0 - pos_part) + hd @ (xdot0 - 2.0 * vel_part))
    acc_coupling_pos = solver.solve(-2.0 * hd @ vel_coupling - hdd @ basis)

    return TangentFrame(
        pos_part=pos_part,
        basis=basis,
        vel_part=vel_part,
        vel_coupling=vel_coupling,
        acc_part=acc_part,
        acc_coupling_pos=acc_coupling_pos,
        acc_coupling_vel=2.0 * vel_coupling,
        x0=x0, xdot0=xdot0, xddot0=xddot0,
        solver=solver,
    )


def rotate_basis(frame, rotation):
    """Equivalent frame with the null-space basis post-multiplied by an
    orthogonal k x k matrix (all chart couplings transform with it).

    Converged integrator steps must not depend on this choice; tests use it
    to verify basis invariance.
    """
    rotation = np.asarray(rotation, dtype=float)
    return TangentFrame(
        pos_part=frame.pos_part,
        basis=frame.basis @ rotation,
        vel_part=frame.vel_part,
        vel_coupling=frame.vel_coupling @ rotation,
        acc_part=frame.acc_part,
        acc_coupling_pos=frame.acc_coupling_pos @ rotation,
        acc_coupling_vel=frame.acc_coupling_vel @ rotation,
        x0=frame.x0, xdot0=frame.xdot0, xddot0=frame.xddot0,
        solver=frame.solver,
    )


def reconstruct_position(frame, a):
    return frame.pos_part + frame.basis @ a


def reconstruct_velocity(frame, a, ad):
    return frame.vel_part + frame.basis @ ad + frame.vel_coupling @ a


def reconstruct_acceleration(frame, a, ad, add):
    return (frame.acc_part + frame.acc_coupling_pos @ a
            + frame.acc_coupling_vel @ ad + frame.basis @ add)


def project_state(frame, x, xdot, xddot):
    """Chart coordinates of a full state, by sequential least squares.

    The projections are overdetermined (a state from time t generally does
    not lie on the chart built at t + dt); with an orthonormal basis the
    least-squares solves reduce to plain transpose products.
    """
    bt = frame.basis.T
    a = bt @ (x - frame.pos_part)
    ad = bt @ (xdot - frame.vel_part - frame.vel_coupling @ a)
    add = bt @ (xddot - frame.acc_part - frame.acc_coupling_pos @ a
                - frame.acc_coupling_vel @ ad)
    return a, ad, add


def reduce_equilibrium(frame, m_lin, c_lin, k_lin, f_lin):
    """Reduced chart equations M_R add + C_R ad + K_R a = f_R.

    Premultiplication by the orthonormal basis transpose drops the
    multiplier forces exactly (their residual linearization already lives
    inside K_L and f_L).
    """
    basis = frame.basis
    bt = basis.T
    m_basis = m_lin @ basis
    m_red = bt @ m_basis
    pivot = cholesky_pivot_check(m_red)
    if pivot is not None:
        raise SingularMassError(
            "reduced mass matrix is singular; the model is ill-posed for "
            f"tangent-space integration (pivot {pivot})", pivot=pivot)
    c_red = bt @ (c_lin @ basis + 2.0 * (m_lin @ frame.vel_coupling))
    k_red = bt @ (k_lin @ basis + c_lin @ frame.vel_coupling
                  + m_lin @ frame.acc_coupling_pos)
    f_red = bt @ (f_lin - k_lin @ frame.pos_part - c_lin @ frame.vel_part
                  - m_lin @ frame.acc_part)
    return m_red, c_red, k_red, f_red
