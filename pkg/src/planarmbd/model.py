"""Planar rigid multibody model.

Bodies carry (x, y, theta) coordinates of their center of gravity; revolute
joints pin a point of one body to a point of another body (or of the
ground); force elements produce generalized forces. The module assembles
the mass matrix, force vector, constraint residuals and their first and
second Jacobian time derivatives, plus the Taylor linearization of the
equations of motion used by the implicit integrators.

Conventions (fixed for the whole package):

* coordinate layout ``(x_1, y_1, th_1, x_2, y_2, th_2, ...)``;
* rotation matrix ``R(th) = [[c, -s], [s, c]]`` with derivatives
  ``R' = [[-s, -c], [c, -s]]``, ``R'' = -R``, ``R''' = -R'``;
* joint residual ``q = p_a - p_b`` with ``p = r_cog + R(th) r_local``;
* equations of motion ``M xdd = f + H^T lam`` (the constraint Jacobian in
  force space coincides with the one in constraint space for planar
  Cartesian coordinates, so a single H plays both roles).
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, SingularMassError
from .linsolve import SvdSolver, cholesky_pivot_check, null_space_basis

GROUND = "ground"


# --------------------------------------------------------------------------
# model description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Body:
    """Rigid body: mass in kg, planar inertia about the CoG in kg m^2.

    A zero mass or inertia is allowed (point masses, massless links); the
    integrators only require the reduced mass matrix to be nonsingular.
    """

    name: str
    mass: float
    inertia_zz: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass >= 0.0):
            raise ValueError(f"body {self.name!r}: mass must be finite and >= 0")
        if not (np.isfinite(self.inertia_zz) and self.inertia_zz >= 0.0):
            raise ValueError(f"body {self.name!r}: inertia_zz must be finite and >= 0")


@dataclass(frozen=True)
class RevoluteJoint:
    """Pin joint: anchor_a on body_a coincides with anchor_b on body_b.

    Anchors are local body-frame coordinates relative to the CoG, or global
    coordinates when the corresponding side is GROUND. Contributes exactly
    two constraint rows.
    """

    body_a: str
    body_b: str
    anchor_a: tuple = (0.0, 0.0)
    anchor_b: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.body_a == GROUND and self.body_b == GROUND:
            raise ValueError("revolute joint cannot connect ground to ground")
        if self.body_a == self.body_b:
            raise ValueError("revolute joint cannot connect a body to itself")
        for name, anchor in (("anchor_a", self.anchor_a), ("anchor_b", self.anchor_b)):
            arr = np.asarray(anchor, dtype=float)
            if arr.shape != (2,) or not np.isfinite(arr).all():
                raise ValueError(f"{name} must be a finite 2-vector")


@dataclass(frozen=True)
class Gravity:
    """Uniform gravity field, acceleration vector (gx, gy) in m/s^2."""

    gx: float = 0.0
    gy: float = -9.81


@dataclass(frozen=True)
class LinearSpringDamper:
    """Spring-damper between a point of body_a and a point of body_b.

    Either side may be GROUND with a global attachment point. Tension
    positive: the element pulls the points together when stretched.
    """

    body_a: str
    point_a: tuple
    body_b: str
    point_b: tuple
    stiffness: float = 0.0
    damping: float = 0.0
    rest_length: float = 1.0

    def __post_init__(self):
        if self.stiffness < 0.0 or self.damping < 0.0:
            raise ValueError("spring stiffness and damping must be >= 0")
        if not self.rest_length > 0.0:
            raise ValueError("spring rest_length must be > 0")


@dataclass(frozen=True)
class TorsionalSpringDamper:
    """Rotational spring-damper acting on the relative angle across a joint.

    The relative angle is th(body_b) - th(body_a); a GROUND side contributes
    zero. No winding normalization is applied, so motions are expected to
    stay within +-pi of the rest angle.
    """

    body_a: str
    body_b: str
    stiffness: float = 0.0
    damping: float = 0.0
    rest_angle: float = 0.0

    def __post_init__(self):
        if self.stiffness < 0.0 or self.damping < 0.0:
            raise ValueError("torsional stiffness and damping must be >= 0")


@dataclass(frozen=True)
class AppliedTorque:
    """Pure torque on a body's angle: tau(t) = constant + amplitude sin(frequency t)."""

    body: str
    constant: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0

    def __call__(self, t):
        tau = self.constant
        if self.amplitude:
            tau = tau + self.amplitude * np.sin(self.frequency * t)
        return tau


@dataclass
class SystemState:
    """Full dynamic state at one instant: t, x, xdot, xddot and multipliers."""

    t: float
    x: np.ndarray
    xdot: np.ndarray
    xddot: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.xdot = np.asarray(self.xdot, dtype=float)
        self.xddot = np.asarray(self.xddot, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if not (self.x.shape == self.xdot.shape == self.xddot.shape):
            raise ValueError("x, xdot and xddot must have identical shapes")
        for name in ("x", "xdot", "xddot", "lam"):
            arr = getattr(self, name)
            if arr.size and not np.isfinite(arr).all():
                raise ValueError(f"state field {name} contains non-finite entries")

    def copy(self):
        return SystemState(self.t, self.x.copy(), self.xdot.copy(),
                           self.xddot.copy(), self.lam.copy())


class MultibodyModel:
    """Immutable planar multibody model.

    The coordinate layout and the constraint row layout are frozen at build
    time: coordinates follow body order, constraint rows follow joint order
    (two rows per joint).
    """

    def __init__(self, bodies, joints=(), forces=()):
        self.bodies = tuple(bodies)
        self.joints = tuple(joints)
        self.forces = tuple(forces)
        if not self.bodies:
            raise ValueError("model needs at least one body")
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError("body names must be unique")
        if GROUND in names:
            raise ValueError(f"{GROUND!r} is reserved for joint attachments")
        self._index = {name: i for i, name in enumerate(names)}

        self.n_bodies = len(self.bodies)
        self.n_coords = 3 * self.n_bodies
        self.n_constraints = 2 * len(self.joints)

        self._masses = np.array([b.mass for b in self.bodies])
        self._inertias = np.array([b.inertia_zz for b in self.bodies])
        diag = np.empty(self.n_coords)
        diag[0::3] = self._masses
        diag[1::3] = self._masses
        diag[2::3] = self._inertias
        self._mass_diag = diag

        self._compile_joints()
        self._compile_forces()

    # -- lookups ------------------------------------------------------------

    def body_index(self, name):
        return self._index[name]

    def coord_index(self, name, component):
        offset = {"x": 0, "y": 1, "theta": 2}[component]
        return 3 * self._index[name] + offset

    def fingerprint(self):
        """Hex digest identifying the model parameters (build determinism)."""
        return hashlib.sha256(
            repr((self.bodies, self.joints, self.forces)).encode()
        ).hexdigest()

    # -- compiled layouts ---------------------------------------------------

    def _compile_joints(self):
        nj = len(self.joints)
        ia = np.empty(nj, dtype=int)
        ib = np.empty(nj, dtype=int)
        ra = np.zeros((nj, 2))
        rb = np.zeros((nj, 2))
        pa_fixed = np.zeros((nj, 2))
        pb_fixed = np.zeros((nj, 2))
        for j, joint in enumerate(self.joints):
            for side, (body, anchor, idx_arr, loc, fix) in enumerate(
                ((joint.body_a, joint.anchor_a, ia, ra, pa_fixed),
                 (joint.body_b, joint.anchor_b, ib, rb, pb_fixed))
            ):
                if body == GROUND:
                    idx_arr[j] = -1
                    fix[j] = anchor
                else:
                    if body not in self._index:
                        raise ValueError(f"joint references unknown body {body!r}")
                    idx_arr[j] = self._index[body]
                    loc[j] = anchor
        self._ja, self._jb = ia, ib
        self._ra, self._rb = ra, rb
        self._pa_fixed, self._pb_fixed = pa_fixed, pb_fixed

        # per-side compiled index arrays for the joints attached to a body
        self._sides = []
        for sign, idx, loc in ((1.0, ia, ra), (-1.0, ib, rb)):
            sel = np.flatnonzero(idx >= 0)
            bodies = idx[sel]
            self._sides.append({
                "sign": sign,
                "joints": sel,                  # joint numbers with a body on this side
                "rows0": 2 * sel,               # first constraint row of each joint
                "cols_th": 3 * bodies + 2,
                "cols_x": 3 * bodies,
                "local": loc[sel],              # anchor in body frame
            })

        h_const = np.zeros((self.n_constraints, self.n_coords))
        for side in self._sides:
            h_const[side["rows0"], side["cols_x"]] = side["sign"]
            h_const[side["rows0"] + 1, side["cols_x"] + 1] = side["sign"]
        self._h_const = h_const

    def _compile_forces(self):
        gravity = np.zeros(2)
        springs = []
        torsion = []
        torques = []
        for element in self.forces:
            if isinstance(element, Gravity):
                gravity = gravity + (element.gx, element.gy)
            elif isinstance(element, LinearSpringDamper):
                springs.append((
                    self._index.get(element.body_a, -1),
                    np.asarray(element.point_a, dtype=float),
                    self._index.get(element.body_b, -1),
                    np.asarray(element.point_b, dtype=float),
                    element,
                ))
            elif isinstance(element, TorsionalSpringDamper):
                torsion.append((
                    self._index.get(element.body_a, -1),
                    self._index.get(element.body_b, -1),
                    element,
                ))
            elif isinstance(element, AppliedTorque):
                torques.append((self._index[element.body], element))
            else:
                raise TypeError(f"unknown force element {element!r}")
        self._gravity = gravity
        self._springs = springs
        self._torsion = torsion
        self._torques = torques


# --------------------------------------------------------------------------
# kinematics of the joints
# --------------------------------------------------------------------------

def _anchor_world(model, x, side_index):
    """World positions (nj, 2) of all anchors on one joint side."""
    side = model._sides[side_index]
    fixed = model._pa_fixed if side_index == 0 else model._pb_fixed
    world = fixed.copy()
    jsel = side["joints"]
    if jsel.size:
        cx = side["cols_x"]
        th = x[side["cols_th"]]
        c, s = np.cos(th), np.sin(th)
        rx, ry = side["local"][:, 0], side["local"][:, 1]
        world[jsel, 0] = x[cx] + c * rx - s * ry
        world[jsel, 1] = x[cx + 1] + s * rx + c * ry
    return world


def constraints(model, x):
    """Stacked revolute residuals q(x); zero iff all joints are closed."""
    if not len(model.joints):
        return np.zeros(0)
    return (_anchor_world(model, x, 0) - _anchor_world(model, x, 1)).ravel()


def constraint_jacobian(model, x):
    """H = dq/dx: +-identity on translations, +-R'(th) r on the angles."""
    h = model._h_const.copy()
    for side in model._sides:
        if not side["joints"].size:
            continue
        th = x[side["cols_th"]]
        c, s = np.cos(th), np.sin(th)
        rx, ry = side["local"][:, 0], side["local"][:, 1]
        sign = side["sign"]
        h[side["rows0"], side["cols_th"]] = sign * (-s * rx - c * ry)
        h[side["rows0"] + 1, side["cols_th"]] = sign * (c * rx - s * ry)
    return h


def jacobian_dot(model, x, xdot):
    """dH/dt along (x, xdot): only the angle columns are nonzero."""
    hd = np.zeros((model.n_constraints, model.n_coords))
    for side in model._sides:
        if not side["joints"].size:
            continue
        th = x[side["cols_th"]]
        thd = xdot[side["cols_th"]]
        c, s = np.cos(th), np.sin(th)
        rx, ry = side["local"][:, 0], side["local"][:, 1]
        sign = side["sign"]
        # R''(th) r thd = -R(th) r thd
        hd[side["rows0"], side["cols_th"]] = sign * (-(c * rx - s * ry) * thd)
        hd[side["rows0"] + 1, side["cols_th"]] = sign * (-(s * rx + c * ry) * thd)
    return hd


def jacobian_ddot(model, x, xdot, xddot):
    """d2H/dt2 along (x, xdot, xddot): angle columns +-(R''' r thd^2 + R'' r thdd)."""
    hdd = np.zeros((model.n_constraints, model.n_coords))
    for side in model._sides:
        if not side["joints"].size:
            continue
        th = x[side["cols_th"]]
        thd = xdot[side["cols_th"]]
        thdd = xddot[side["cols_th"]]
        c, s = np.cos(th), np.sin(th)
        rx, ry = side["local"][:, 0], side["local"][:, 1]
        sign = side["sign"]
        rot_x, rot_y = c * rx - s * ry, s * rx + c * ry          # R r
        rotp_x, rotp_y = -s * rx - c * ry, c * rx - s * ry       # R' r
        hdd[side["rows0"], side["cols_th"]] = sign * (-rotp_x * thd ** 2 - rot_x * thdd)
        hdd[side["rows0"] + 1, side["cols_th"]] = sign * (-rotp_y * thd ** 2 - rot_y * thdd)
    return hdd


def constraint_velocity(model, x, xdot):
    """qdot = H xdot (constraints carry no explicit time dependence)."""
    return constraint_jacobian(model, x) @ xdot


def constraint_acceleration(model, x, xdot, xddot):
    """qddot = H xddot + Hdot xdot."""
    return constraint_jacobian(model, x) @ xddot + jacobian_dot(model, x, xdot) @ xdot


# --------------------------------------------------------------------------
# forces
# --------------------------------------------------------------------------

def mass_matrix(model):
    """Constant block-diagonal mass matrix diag(m, m, I) per body."""
    return np.diag(model._mass_diag)


def _spring_geometry(model, x, xdot, ia, pa, ib, pb):
    """World positions, velocities and angle-lever vectors of both endpoints."""
    out = []
    for idx, local in ((ia, pa), (ib, pb)):
        if idx < 0:
            out.append((local, np.zeros(2), np.zeros(2), np.zeros(2)))
            continue
        base = 3 * idx
        th, thd = x[base + 2], xdot[base + 2]
        c, s = np.cos(th), np.sin(th)
        rot = np.array([c * local[0] - s * local[1], s * local[0] + c * local[1]])
        lever = np.array([-rot[1], rot[0]])       # R'(th) r
        pos = x[base:base + 2] + rot
        vel = xdot[base:base + 2] + thd * lever
        out.append((pos, vel, lever, rot))
    return out


def _forces(model, t, x, xdot):
    f = np.zeros(model.n_coords)
    if model._gravity.any():
        f[0::3] += model._masses * model._gravity[0]
        f[1::3] += model._masses * model._gravity[1]
    for ia, pa, ib, pb, el in model._springs:
        (posa, vela, levera, _), (posb, velb, leverb, _) = \
            _spring_geometry(model, x, xdot, ia, pa, ib, pb)
        d = posb - posa
        length = np.hypot(d[0], d[1])
        if length < 1e-12:
            raise ValueError("spring-damper endpoints coincide; force undefined")
        u = d / length
        rate = u @ (velb - vela)
        tension = el.stiffness * (length - el.rest_length) + el.damping * rate
        pull = tension * u                        # force on endpoint a, toward b
        if ia >= 0:
            f[3 * ia:3 * ia + 2] += pull
            f[3 * ia + 2] += levera @ pull
        if ib >= 0:
            f[3 * ib:3 * ib + 2] -= pull
            f[3 * ib + 2] -= leverb @ pull
    for ia, ib, el in model._torsion:
        tha = x[3 * ia + 2] if ia >= 0 else 0.0
        thb = x[3 * ib + 2] if ib >= 0 else 0.0
        thda = xdot[3 * ia + 2] if ia >= 0 else 0.0
        thdb = xdot[3 * ib + 2] if ib >= 0 else 0.0
        moment = el.stiffness * (thb - tha - el.rest_angle) + el.damping * (thdb - thda)
        if ia >= 0:
            f[3 * ia + 2] += moment
        if ib >= 0:
            f[3 * ib + 2] -= moment
    for idx, el in model._torques:
        f[3 * idx + 2] += el(t)
    return f


def force_vector(model, state):
    """Generalized applied forces f(x, xdot, t); contains no multiplier forces."""
    return _forces(model, state.t, state.x, state.xdot)


def _force_jacobians(model, t, x, xdot):
    """Analytic (df/dx, df/dxdot) of the applied forces."""
    n = model.n_coords
    dfdx = np.zeros((n, n))
    dfdv = np.zeros((n, n))
    for ia, pa, ib, pb, el in model._springs:
        (posa, vela, levera, rota), (posb, velb, leverb, rotb) = \
            _spring_geometry(model, x, xdot, ia, pa, ib, pb)
        d = posb - posa
        length = np.hypot(d[0], d[1])
        if length < 1e-12:
            raise ValueError("spring-damper endpoints coincide; force undefined")
        u = d / length
        w = velb - vela
        proj = (np.eye(2) - np.outer(u, u)) / length
        tension = el.stiffness * (length - el.rest_length) + el.damping * (u @ w)

        sides = []
        if ia >= 0:
            sides.append((ia, +1.0, levera, rota, xdot[3 * ia + 2]))
        if ib >= 0:
            sides.append((ib, -1.0, leverb, rotb, xdot[3 * ib + 2]))

        # endpoint-position Jacobians J = d(pos)/d(coords of that body)
        def endpoint_jac(lever):
            j = np.zeros((2, 3))
            j[:, :2] = np.eye(2)
            j[:, 2] = lever
            return j

        for idx, sgn, lever, rot, thd in sides:
            cols = slice(3 * idx, 3 * idx + 3)
            jac = endpoint_jac(lever)
            dd_dq = -sgn * jac                    # d(d)/dq of this body (d = posb - posa)
            dw_dq = np.zeros((2, 3))
            dw_dq[:, 2] = -sgn * thd * (-rot)     # d(vel)/dth = thd R'' r = -thd R r
            dlen = u @ dd_dq
            drate = w @ (proj @ dd_dq) + u @ dw_dq
            dtension = el.stiffness * dlen + el.damping * drate
            dpull = np.outer(u, dtension) + tension * (proj @ dd_dq)
            dpull_v = el.damping * np.outer(u, u @ (-sgn * jac))

            for jdx, jsgn, jlever, jrot, _ in sides:
                rows = slice(3 * jdx, 3 * jdx + 3)
                jjac = endpoint_jac(jlever)
                dfdx[rows, cols] += jsgn * (jjac.T @ dpull)
                dfdv[rows, cols] += jsgn * (jjac.T @ dpull_v)
            # lever itself rotates with the body: extra theta-row term
            pull = tension * u
            dfdx[3 * idx + 2, 3 * idx + 2] += sgn * ((-rot) @ pull)
    for ia, ib, el in model._torsion:
        entries = []
        if ia >= 0:
            entries.append((3 * ia + 2, +1.0))
        if ib >= 0:
            entries.append((3 * ib + 2, -1.0))
        # moment = k (thb - tha - th0) + c (thdb - thda); force +moment on a, -moment on b
        for row, rsgn in entries:
            for col, csgn in entries:
                dfdx[row, col] += rsgn * (-csgn) * el.stiffness
                dfdv[row, col] += rsgn * (-csgn) * el.damping
    return dfdx, dfdv


def _lambda_stiffness_diag(model, x, lam):
    """Diagonal of -d(H^T lam)/dx (geometric stiffness of the joint forces)."""
    diag = np.zeros(model.n_coords)
    if not lam.size:
        return diag
    pairs = lam.reshape(-1, 2)
    for side in model._sides:
        jsel = side["joints"]
        if not jsel.size:
            continue
        th = x[side["cols_th"]]
        c, s = np.cos(th), np.sin(th)
        rx, ry = side["local"][:, 0], side["local"][:, 1]
        rot_x, rot_y = c * rx - s * ry, s * rx + c * ry
        # d(H^T lam)_th / dth = sign (R'' r) . lam = -sign (R r) . lam
        contrib = side["sign"] * (rot_x * pairs[jsel, 0] + rot_y * pairs[jsel, 1])
        np.add.at(diag, side["cols_th"], contrib)
    return diag


def _linearize(model, t, x, xdot, lam):
    dfdx, dfdv = _force_jacobians(model, t, x, xdot)
    k_mat = -dfdx
    k_mat[np.diag_indices_from(k_mat)] += _lambda_stiffness_diag(model, x, lam)
    c_mat = -dfdv
    f_lin = _forces(model, t, x, xdot) + k_mat @ x + c_mat @ xdot
    return np.diag(model._mass_diag), c_mat, k_mat, f_lin


def linearize_equilibrium(model, state):
    """Taylor linearization M_L xdd + C_L xd + K_L x = f_L + H^T lam.

    Built about ``state`` (including its multiplier estimate, which feeds
    the geometric stiffness of the joint forces); the linearization point
    itself satisfies the linearized equation exactly whenever it satisfies
    the nonlinear one.
    """
    return _linearize(model, state.t, state.x, state.xdot, state.lam)


def mechanical_energy(model, state):
    """Kinetic plus potential energy (gravity datum at the global origin)."""
    return _energy(model, state.x, state.xdot)


def _energy(model, x, xdot):
    energy = 0.5 * xdot @ (model._mass_diag * xdot)
    if model._gravity.any():
        energy -= model._gravity[0] * (model._masses @ x[0::3])
        energy -= model._gravity[1] * (model._masses @ x[1::3])
    for ia, pa, ib, pb, el in model._springs:
        (posa, _, _, _), (posb, _, _, _) = _spring_geometry(model, x, xdot, ia, pa, ib, pb)
        stretch = np.hypot(*(posb - posa)) - el.rest_length
        energy += 0.5 * el.stiffness * stretch ** 2
    for ia, ib, el in model._torsion:
        tha = x[3 * ia + 2] if ia >= 0 else 0.0
        thb = x[3 * ib + 2] if ib >= 0 else 0.0
        energy += 0.5 * el.stiffness * (thb - tha - el.rest_angle) ** 2
    return float(energy)


# --------------------------------------------------------------------------
# assembly and consistent initialization
# --------------------------------------------------------------------------

def _pinned_rows(model, pinned):
    if not pinned:
        return np.zeros((0, model.n_coords)), np.zeros(0), np.zeros(0, dtype=int)
    idx = np.array(sorted(pinned), dtype=int)
    rows = np.zeros((idx.size, model.n_coords))
    rows[np.arange(idx.size), idx] = 1.0
    targets = np.array([pinned[i] for i in idx], dtype=float)
    return rows, targets, idx


def assemble_position(model, x_guess, pinned=None, tol=1e-12, max_iters=100):
    """Newton iteration closing q(x) = 0 from a guess.

    ``pinned`` maps coordinate indices to prescribed values (driving
    coordinates); the pin rows are appended to the constraint system and
    solved together in the minimal-norm least-squares sense.
    """
    x = np.asarray(x_guess, dtype=float).copy()
    if not np.isfinite(x).all():
        raise ValueError("position guess contains non-finite entries")
    rows, targets, idx = _pinned_rows(model, pinned)
    for _ in range(max_iters):
        residual = np.concatenate([constraints(model, x), x[idx] - targets])
        if residual.size == 0 or np.abs(residual).max() <= tol:
            return x
        full = np.vstack([constraint_jacobian(model, x), rows])
        x += SvdSolver(full).solve(-residual)
    residual = np.concatenate([constraints(model, x), x[idx] - targets])
    worst = float(np.abs(residual).max())
    raise AssemblyError(
        f"position assembly did not converge in {max_iters} iterations "
        f"(residual {worst:.3e})", residual=worst)


def check_reduced_mass(model, x):
    """Raise SingularMassError when N^T M N is rank deficient at ``x``."""
    basis = null_space_basis(constraint_jacobian(model, x))
    reduced = basis.T @ (model._mass_diag[:, None] * basis)
    pivot = cholesky_pivot_check(reduced)
    if pivot is not None:
        raise SingularMassError(
            "reduced mass matrix is singular: the model has massless "
            f"unconstrained directions (pivot {pivot})", pivot=pivot)


def consistent_initial_state(model, x, xdot_pins=None, t=0.0):
    """Initial state with consistent velocities, accelerations and multipliers.

    Velocities solve H xd = 0 with the pinned driving values appended
    (minimal-norm otherwise); accelerations and multipliers solve the
    augmented index-1 system [M, -H^T; H, 0] (xdd, lam) = (f, -Hdot xd) in
    the least-squares sense.
    """
    x = np.asarray(x, dtype=float)
    q = constraints(model, x)
    if q.size and np.abs(q).max() > 1e-8:
        raise ValueError(
            "initial position does not close the constraints; run "
            f"assemble_position first (|q| = {np.abs(q).max():.3e})")
    check_reduced_mass(model, x)

    h = constraint_jacobian(model, x)
    rows, targets, _ = _pinned_rows(model, xdot_pins)
    xdot = SvdSolver(np.vstack([h, rows])).solve(
        np.concatenate([np.zeros(h.shape[0]), targets]))

    m = len(model.joints) * 2
    n = model.n_coords
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = np.diag(model._mass_diag)
    aug[:n, n:] = -h.T
    aug[n:, :n] = h
    rhs = np.concatenate([
        _forces(model, t, x, xdot),
        -(jacobian_dot(model, x, xdot) @ xdot),
    ])
    sol = SvdSolver(aug).solve(rhs)
    return SystemState(t, x, xdot, sol[:n], sol[n:])


def recover_multipliers(model, state):
    """Least-squares multipliers from H^T lam = M xdd - f."""
    h = constraint_jacobian(model, state.x)
    rhs = model._mass_diag * state.xddot - _forces(model, state.t, state.x, state.xdot)
    return SvdSolver(h).solve_transpose(rhs)
