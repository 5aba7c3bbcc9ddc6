"""Built-in benchmark scenarios.

Each builder returns a Scenario bundling the system, a consistent initial
state and default integrator settings. Parameter overrides are plain
keyword arguments (the CLI forwards config-file entries here); unknown
keys are rejected.

Sources of the numeric defaults:

* stiff pendulum: unit point mass on a massless 1 m truss, g = 9.8,
  harmonic drive 0.1 sin(0.1 t) N m;
* double pendulum: two uniform unit rods under g = 9.81; masses, lengths
  and the torsional joint coefficients are artifact defaults (the
  literature problem leaves them to the original authors), exposed as
  overrides;
* Andrews squeezer: fixed points, truss masses/lengths/inertias/CoG
  offsets, spring and drive torque from the published mechanism data;
  the local geometry of the triangular body BDE and the spring attachment
  point D follow the canonical benchmark description (B at local (0,0),
  E at (0, -0.035), D at (0.02, -0.018), CoG at (0.01874, -0.01043),
  frame x right / y up at zero rotation);
* double four-bar: the standard 1 m / 1 kg three-crank, two-coupler
  linkage under g = 9.81, started from the vertical-crank position with
  the first crank at -1 rad/s (leftmost coupler point moving at 1 m/s).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .integrators import (
    FOX_GOODWIN,
    TRAPEZOIDAL,
    MinimalSystem,
    NewmarkParams,
    StepConfig,
    consistent_minimal_state,
)
from .model import (
    GROUND,
    AppliedTorque,
    Body,
    Gravity,
    LinearSpringDamper,
    MultibodyModel,
    RevoluteJoint,
    TorsionalSpringDamper,
    assemble_position,
    consistent_initial_state,
    mechanical_energy,
)


@dataclass
class Scenario:
    """A ready-to-run benchmark configuration."""

    name: str
    system: object               # MultibodyModel or MinimalSystem
    initial_state: object
    params: NewmarkParams
    cfg: StepConfig
    default_t_end: float
    overrides: dict = field(default_factory=dict)


def _merge(defaults, overrides):
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}; "
                         f"known: {sorted(defaults)}")
    merged = dict(defaults)
    merged.update(overrides)
    return merged


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# --------------------------------------------------------------------------
# stiff pendulum
# --------------------------------------------------------------------------

PENDULUM_DEFAULTS = {
    "mass": 1.0,
    "length": 1.0,
    "gravity": 9.8,
    "inertia": 0.0,
    "torque_amplitude": 0.1,
    "torque_frequency": 0.1,
    "theta0": 0.0,
    "theta_dot0": 0.0,
    "dt": 0.1,
}


def stiff_pendulum(variant="constrained", **overrides):
    """Harmonically driven pendulum, minimal (angle) or constrained form.

    The angle is measured from the hanging position, positive
    counterclockwise; the constrained variant places a single point-mass
    body at the CoG with a ground revolute at the pivot, which makes the
    mass matrix singular on purpose.
    """
    p = _merge(PENDULUM_DEFAULTS, overrides)
    m, length, grav = p["mass"], p["length"], p["gravity"]
    t0_amp, t0_freq = p["torque_amplitude"], p["torque_frequency"]

    if variant == "minimal":
        def force(t, x, v):
            return np.array([t0_amp * np.sin(t0_freq * t)
                             - m * grav * length * np.sin(x[0])])

        def jacobians(t, x, v):
            return (np.array([[-m * grav * length * np.cos(x[0])]]),
                    np.zeros((1, 1)))

        def energy(x, v):
            return (0.5 * (m * length ** 2 + p["inertia"]) * v[0] ** 2
                    - m * grav * length * np.cos(x[0]))

        system = MinimalSystem(
            mass=np.array([[m * length ** 2 + p["inertia"]]]),
            force=force, force_jacobians=jacobians, energy=energy,
            labels=("theta",))
        state = consistent_minimal_state(
            system, [p["theta0"]], [p["theta_dot0"]])
        name = "pendulum-minimal"
    elif variant == "constrained":
        bodies = [Body("bob", m, p["inertia"])]
        joints = [RevoluteJoint("bob", GROUND, anchor_a=(0.0, length),
                                anchor_b=(0.0, 0.0))]
        forces = [Gravity(0.0, -grav),
                  AppliedTorque("bob", amplitude=t0_amp, frequency=t0_freq)]
        system = MultibodyModel(bodies, joints, forces)
        th = p["theta0"]
        x = np.array([length * math.sin(th), -length * math.cos(th), th])
        state = consistent_initial_state(
            system, x, xdot_pins={2: p["theta_dot0"]})
        name = "pendulum-constrained"
    else:
        raise ValueError(f"unknown pendulum variant {variant!r}")

    return Scenario(name, system, state, FOX_GOODWIN,
                    StepConfig(dt=p["dt"]), default_t_end=600.0,
                    overrides=dict(overrides))


# --------------------------------------------------------------------------
# double pendulum
# --------------------------------------------------------------------------

DOUBLE_PENDULUM_DEFAULTS = {
    "mass_1": 1.0,
    "mass_2": 1.0,
    "length_1": 1.0,
    "length_2": 1.0,
    "gravity": 9.81,
    "torsion_stiffness": 0.0,
    "torsion_damping": 0.0,
    "angle_1": 0.0,              # from +x axis; 0 = horizontal, -pi/2 = hanging
    "angle_2": 0.0,
    "dt": 5e-4,
}


def double_pendulum(**overrides):
    """Two-link chain with torsional spring-dampers at both joints.

    Links are uniform slender rods (I = m l^2 / 12 about the CoG). The
    default initial configuration is both links horizontal and at rest;
    torsional elements are unloaded in the initial configuration.
    """
    p = _merge(DOUBLE_PENDULUM_DEFAULTS, overrides)
    l1, l2 = p["length_1"], p["length_2"]
    a1, a2 = p["angle_1"], p["angle_2"]

    bodies = [
        Body("link1", p["mass_1"], p["mass_1"] * l1 ** 2 / 12.0),
        Body("link2", p["mass_2"], p["mass_2"] * l2 ** 2 / 12.0),
    ]
    joints = [
        RevoluteJoint("link1", GROUND, anchor_a=(-l1 / 2, 0.0), anchor_b=(0.0, 0.0)),
        RevoluteJoint("link1", "link2", anchor_a=(l1 / 2, 0.0), anchor_b=(-l2 / 2, 0.0)),
    ]
    forces = [Gravity(0.0, -p["gravity"])]
    if p["torsion_stiffness"] or p["torsion_damping"]:
        forces.append(TorsionalSpringDamper(
            GROUND, "link1", p["torsion_stiffness"], p["torsion_damping"],
            rest_angle=a1))
        forces.append(TorsionalSpringDamper(
            "link1", "link2", p["torsion_stiffness"], p["torsion_damping"],
            rest_angle=a2 - a1))
    system = MultibodyModel(bodies, joints, forces)

    cog1 = _rot(a1) @ (l1 / 2, 0.0)
    elbow = _rot(a1) @ (l1, 0.0)
    cog2 = elbow + _rot(a2) @ (l2 / 2, 0.0)
    x = np.array([cog1[0], cog1[1], a1, cog2[0], cog2[1], a2])
    state = consistent_initial_state(system, x)
    return Scenario("double-pendulum", system, state, FOX_GOODWIN,
                    StepConfig(dt=p["dt"]), default_t_end=10.0,
                    overrides=dict(overrides))


# --------------------------------------------------------------------------
# Andrews squeezer mechanism
# --------------------------------------------------------------------------

SQUEEZER_FIXED_POINTS = {
    "A": (-0.06934, -0.00227),
    "B": (-0.03635, 0.03273),
    "C": (0.014, 0.072),
    "O": (0.0, 0.0),
}

# name: (mass, length, inertia, cog_x, cog_y); local origin at the first
# letter's endpoint, x-axis toward the second letter's endpoint
SQUEEZER_TRUSSES = {
    "OF": (0.004325, 0.007, 2.194e-6, 0.00092, 0.0),
    "EF": (0.00365, 0.028, 4.41e-7, 0.0165, 0.0),
    "HE": (0.00706, 0.02, 5.667e-7, 0.00579, 0.0),
    "GE": (0.00706, 0.02, 5.667e-7, 0.00579, 0.0),
    "AG": (0.05498, 0.04, 1.169e-5, 0.02308, 0.00916),
    "AH": (0.02373, 0.04, 1.912e-5, 0.01228, -0.00449),
}

# solid BDE, local frame anchored at B: benchmark geometry
SQUEEZER_BDE = {
    "mass": 0.02373,
    "inertia": 5.255e-6,
    "E": (0.0, -0.035),          # BE length 0.035
    "D": (0.02, -0.018),         # spring attachment
    "cog": (0.01874, -0.01043),
}

SQUEEZER_DEFAULTS = {
    "spring_stiffness": 4530.0,
    "spring_rest_length": 0.07785,
    "drive_torque": 0.033,
    "crank_angle": -0.062,
    "dt": 2e-6,
}

# benchmark-consistent initial guess for the remaining body angles
_SQUEEZER_GUESS_ANGLES = {
    "EF": -0.0617,
    "BDE": 0.4553,
    "AG": 0.4874,
    "GE": 0.7100 - math.pi / 2,
    "AH": 1.2305 - math.pi / 2,
    "HE": 1.0079,
}


def _truss_anchors(name):
    """Local anchor coordinates (relative to the CoG) of a truss's endpoints."""
    mass, length, inertia, cx, cy = SQUEEZER_TRUSSES[name]
    return {name[0]: (-cx, -cy), name[1]: (length - cx, -cy)}


def andrews_squeezer(**overrides):
    """Seven-body squeezing mechanism with a stiff spring, no gravity.

    Four bodies meet at point E; all six body pairs there are joined,
    which makes the constraint set redundant (26 rows, rank 20) and
    exercises the minimal least-squares machinery. The initial position is
    assembled with the crank angle pinned.
    """
    p = _merge(SQUEEZER_DEFAULTS, overrides)

    bodies = [Body(name, SQUEEZER_TRUSSES[name][0], SQUEEZER_TRUSSES[name][2])
              for name in SQUEEZER_TRUSSES]
    bodies.append(Body("BDE", SQUEEZER_BDE["mass"], SQUEEZER_BDE["inertia"]))

    bde_cog = np.asarray(SQUEEZER_BDE["cog"])
    bde_anchor = {
        "B": tuple(-bde_cog),
        "E": tuple(np.asarray(SQUEEZER_BDE["E"]) - bde_cog),
        "D": tuple(np.asarray(SQUEEZER_BDE["D"]) - bde_cog),
    }
    anchors = {name: _truss_anchors(name) for name in SQUEEZER_TRUSSES}
    anchors["BDE"] = bde_anchor

    def pin(body_a, body_b, point):
        if body_b == GROUND:
            return RevoluteJoint(body_a, GROUND, anchors[body_a][point],
                                 SQUEEZER_FIXED_POINTS[point])
        return RevoluteJoint(body_a, body_b, anchors[body_a][point],
                             anchors[body_b][point])

    joints = [
        pin("OF", GROUND, "O"),
        pin("OF", "EF", "F"),
        # point E is shared by four bodies; all six pairings are joined
        pin("EF", "BDE", "E"),
        pin("EF", "HE", "E"),
        pin("EF", "GE", "E"),
        pin("HE", "GE", "E"),
        pin("HE", "BDE", "E"),
        pin("GE", "BDE", "E"),
        pin("AH", "HE", "H"),
        pin("AG", "GE", "G"),
        pin("AG", GROUND, "A"),
        pin("AH", GROUND, "A"),
        pin("BDE", GROUND, "B"),
    ]
    forces = [
        LinearSpringDamper(GROUND, SQUEEZER_FIXED_POINTS["C"], "BDE",
                           bde_anchor["D"], stiffness=p["spring_stiffness"],
                           rest_length=p["spring_rest_length"]),
        AppliedTorque("OF", constant=p["drive_torque"]),
    ]
    system = MultibodyModel(bodies, joints, forces)

    guess_angles = dict(_SQUEEZER_GUESS_ANGLES)
    beta0 = p["crank_angle"]

    def place(name, theta, base_point, base_anchor):
        return np.asarray(base_point) - _rot(theta) @ anchors[name][base_anchor]

    guess = np.zeros(system.n_coords)

    def set_body(name, theta, base_point, base_anchor):
        i = system.body_index(name)
        cog = place(name, theta, base_point, base_anchor)
        guess[3 * i:3 * i + 2] = cog
        guess[3 * i + 2] = theta
        return cog

    cog_of = set_body("OF", beta0, SQUEEZER_FIXED_POINTS["O"], "O")
    point_f = cog_of + _rot(beta0) @ anchors["OF"]["F"]
    set_body("EF", guess_angles["EF"], point_f, "F")
    set_body("BDE", guess_angles["BDE"], SQUEEZER_FIXED_POINTS["B"], "B")
    cog_ag = set_body("AG", guess_angles["AG"], SQUEEZER_FIXED_POINTS["A"], "A")
    point_g = cog_ag + _rot(guess_angles["AG"]) @ anchors["AG"]["G"]
    set_body("GE", guess_angles["GE"], point_g, "G")
    cog_ah = set_body("AH", guess_angles["AH"], SQUEEZER_FIXED_POINTS["A"], "A")
    point_h = cog_ah + _rot(guess_angles["AH"]) @ anchors["AH"]["H"]
    set_body("HE", guess_angles["HE"], point_h, "H")

    crank_theta = system.coord_index("OF", "theta")
    x = assemble_position(system, guess, pinned={crank_theta: beta0})
    state = consistent_initial_state(system, x)
    return Scenario("andrews-squeezer", system, state, FOX_GOODWIN,
                    StepConfig(dt=p["dt"]), default_t_end=0.03,
                    overrides=dict(overrides))


# --------------------------------------------------------------------------
# double four-bar linkage
# --------------------------------------------------------------------------

FOUR_BAR_DEFAULTS = {
    "bar_length": 1.0,
    "bar_mass": 1.0,
    "gravity": 9.81,
    "crank_rate": -1.0,          # initial angular velocity of every crank
    "dt": 1e-2,
}


def double_four_bar(**overrides):
    """Three vertical cranks joined by two horizontal couplers (1 DOF).

    Conservative benchmark: uniform 1 m / 1 kg rods, gravity only. The
    motion starts from the vertical-crank configuration with the cranks
    rotating at crank_rate (the default makes the coupler points move at
    1 m/s in +x).
    """
    p = _merge(FOUR_BAR_DEFAULTS, overrides)
    length, mass = p["bar_length"], p["bar_mass"]
    inertia = mass * length ** 2 / 12.0
    half = length / 2.0

    bodies = [Body(f"crank{i}", mass, inertia) for i in (1, 2, 3)]
    bodies += [Body(f"coupler{i}", mass, inertia) for i in (1, 2)]
    joints = [
        RevoluteJoint("crank1", GROUND, (-half, 0.0), (0.0, 0.0)),
        RevoluteJoint("crank2", GROUND, (-half, 0.0), (length, 0.0)),
        RevoluteJoint("crank3", GROUND, (-half, 0.0), (2 * length, 0.0)),
        RevoluteJoint("crank1", "coupler1", (half, 0.0), (-half, 0.0)),
        RevoluteJoint("crank2", "coupler1", (half, 0.0), (half, 0.0)),
        RevoluteJoint("crank2", "coupler2", (half, 0.0), (-half, 0.0)),
        RevoluteJoint("crank3", "coupler2", (half, 0.0), (half, 0.0)),
    ]
    system = MultibodyModel(bodies, joints, [Gravity(0.0, -p["gravity"])])

    x = np.array([
        0.0, half, math.pi / 2,
        length, half, math.pi / 2,
        2 * length, half, math.pi / 2,
        half, length, 0.0,
        3 * half, length, 0.0,
    ])
    state = consistent_initial_state(
        system, x, xdot_pins={system.coord_index("crank1", "theta"): p["crank_rate"]})
    return Scenario("double-four-bar", system, state, TRAPEZOIDAL,
                    StepConfig(dt=p["dt"]), default_t_end=10.0,
                    overrides=dict(overrides))


# --------------------------------------------------------------------------
# metrics and registry
# --------------------------------------------------------------------------

def energy_drift(system, trajectory):
    """Maximum |E(t) - E(0)| over the recorded trajectory, in joules."""
    energies = np.array([r.energy for r in trajectory.records], dtype=float)
    if np.isnan(energies).any():
        if not isinstance(system, MultibodyModel):
            raise ValueError("trajectory lacks energies and the system "
                             "cannot recompute them")
        energies = np.array([mechanical_energy(system, r.state)
                             for r in trajectory.records])
    return float(np.abs(energies - energies[0]).max())


SCENARIOS = {
    "pendulum-minimal": lambda **ov: stiff_pendulum("minimal", **ov),
    "pendulum-constrained": lambda **ov: stiff_pendulum("constrained", **ov),
    "double-pendulum": double_pendulum,
    "andrews-squeezer": andrews_squeezer,
    "double-four-bar": double_four_bar,
}


def build_scenario(name, **overrides):
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; "
                         f"choose one of {sorted(SCENARIOS)}")
    return SCENARIOS[name](**overrides)
