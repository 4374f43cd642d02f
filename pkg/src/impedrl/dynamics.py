"""Planar articulated dynamics with penalty-based surface contact.

Two robot presets are supported:

* ``hopper`` -- a base constrained to vertical travel (prismatic joint)
  carrying a two-joint leg, hopping on a ground plane.
* ``planar_arm`` -- a fixed-base arm whose first two revolute joints position
  the wrist in a horizontal work plane at ``base_height`` and whose third
  (wrist) joint pitches the tool link down toward a table below.  At
  ``q = 0`` the chain is fully stretched in the plane; positive wrist angle
  presses the tool tip below the plane.

Every link is a slender rod, internally replaced by its exact three-point
equivalent (both ends plus the centre of mass, with masses chosen to match
total mass, centre of mass and transverse inertia).  Mass matrix, velocity
product terms and gravity all derive from the point kinematics, which keeps
the three quantities mutually consistent by construction.  Spin of a link
about its own long axis carries no inertia under the slender-rod assumption.

Contact is a one-sided spring-damper on penetration depth with regularized
Coulomb friction.  The contact normal is always +z (ground and table are
horizontal planes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PRISMATIC = "prismatic"
REVOLUTE = "revolute"

# Fraction of the apparent contact mass the damping impulse may remove in one
# step; keeps the explicit damper from overshooting at light contact points.
_DAMPING_CLAMP = 0.5

_DIVERGENCE_SPEED = 1e6


class InvalidStateError(ValueError):
    """Raised when a configuration or state contains non-finite values."""


class SimulationDivergedError(RuntimeError):
    """Raised when integration produces a non-finite or runaway state."""


@dataclass(frozen=True)
class ContactParams:
    """Penalty contact surface: height, stiffness, damping and friction."""

    surface_height: float = 0.0
    normal_stiffness: float = 1.5e4
    normal_damping: float = 100.0
    coulomb_friction: float = 0.8
    regularization_velocity: float = 0.01

    def __post_init__(self):
        if not self.normal_stiffness > 0.0:
            raise ValueError("normal_stiffness must be > 0")
        if self.normal_damping < 0.0:
            raise ValueError("normal_damping must be >= 0")
        if self.coulomb_friction < 0.0:
            raise ValueError("coulomb_friction must be >= 0")
        if not self.regularization_velocity > 0.0:
            raise ValueError("regularization_velocity must be > 0")


@dataclass
class ContactPoint:
    """One active contact: where it is, how deep, and the forces it carries.

    ``tangential_force`` is the signed magnitude along the slip direction
    (always <= 0: friction opposes sliding).
    """

    body_id: str
    position: np.ndarray
    penetration_depth: float
    normal_force: float
    tangential_force: float
    endeffector: bool = True


@dataclass
class EnvState:
    """Full simulator state: generalized positions/velocities and contacts."""

    q: np.ndarray
    qdot: np.ndarray
    time: float = 0.0
    contacts: list = field(default_factory=list)

    def copy(self) -> "EnvState":
        return EnvState(self.q.copy(), self.qdot.copy(), self.time,
                        list(self.contacts))


@dataclass
class FramePose:
    """Rigid transform of a link frame: origin and rotation matrix."""

    origin: np.ndarray
    rotation: np.ndarray


@dataclass
class RobotModel:
    """Kinematic/dynamic description of one articulated chain.

    ``link_lengths[0]`` of the hopper is the base body extent and does not
    enter the chain geometry (the base translates, it does not rotate).
    ``torque_limits`` has one entry per *actuated* joint.
    """

    preset: str
    joint_kinds: tuple
    link_lengths: tuple
    link_masses: tuple
    link_com_offsets: tuple
    link_inertias: tuple
    joint_position_limits: tuple
    actuated: tuple
    torque_limits: tuple
    gravity: float = 9.81
    base_fixed: bool = True
    base_height: float = 0.0
    joint_damping: tuple = ()
    limit_stiffness: float = 50.0
    limit_damping: float = 2.0

    def __post_init__(self):
        n = len(self.joint_kinds)
        if self.preset not in ("hopper", "planar_arm"):
            raise ValueError(f"unknown preset '{self.preset}'")
        if n != 3:
            raise ValueError("presets use exactly 3 generalized coordinates")
        if self.preset == "planar_arm" and any(
                k != REVOLUTE for k in self.joint_kinds):
            raise ValueError("planar_arm joints must all be revolute")
        if self.preset == "hopper" and self.joint_kinds != (
                PRISMATIC, REVOLUTE, REVOLUTE):
            raise ValueError("hopper joints must be (prismatic, revolute x2)")
        for name, vals in (("link_lengths", self.link_lengths),
                           ("link_masses", self.link_masses)):
            if len(vals) != n or any(v <= 0.0 for v in vals):
                raise ValueError(f"{name} must be {n} positive values")
        if len(self.link_inertias) != n or any(v < 0.0 for v in self.link_inertias):
            raise ValueError("link_inertias must be non-negative")
        if len(self.link_com_offsets) != n:
            raise ValueError("link_com_offsets must have one entry per link")
        if len(self.joint_position_limits) != n or any(
                lo >= hi for lo, hi in self.joint_position_limits):
            raise ValueError("joint_position_limits must be (lo, hi) with lo < hi")
        if len(self.actuated) != n:
            raise ValueError("actuated mask must have one entry per joint")
        if len(self.torque_limits) != self.n_actuated or any(
                t <= 0.0 for t in self.torque_limits):
            raise ValueError("torque_limits must be positive, one per actuated joint")
        if not self.joint_damping:
            self.joint_damping = (0.0,) * n
        if len(self.joint_damping) != n or any(d < 0.0 for d in self.joint_damping):
            raise ValueError("joint_damping must be non-negative, one per joint")
        self._kin = None

    @property
    def n_joints(self) -> int:
        return len(self.joint_kinds)

    @property
    def n_actuated(self) -> int:
        return sum(1 for a in self.actuated if a)

    @property
    def actuated_indices(self) -> tuple:
        return tuple(i for i, a in enumerate(self.actuated) if a)

    @property
    def kinematics(self):
        if self._kin is None:
            cls = _HopperKinematics if self.preset == "hopper" else _ArmKinematics
            self._kin = cls(self)
        return self._kin


def _rod_points(mass, length, com, inertia):
    """Three collinear point masses equivalent to a rod.

    Points at distances (0, com, length) from the proximal joint whose total
    mass, centre of mass and second moment about the centre of mass match the
    rod exactly.  Requires inertia <= mass * com * (length - com).
    """
    if not 0.0 < com < length:
        raise ValueError("link com offset must lie strictly inside the link")
    m_prox = inertia / (com * length)
    m_dist = inertia / ((length - com) * length)
    m_mid = mass - m_prox - m_dist
    if m_mid < 0.0:
        raise ValueError(
            "link inertia too large for a physical rod of this length/com")
    return [(0.0, m_prox), (com, m_mid), (length, m_dist)]


@dataclass
class _Probe:
    """A named body point tracked for contact (not a mass point)."""

    name: str
    template: tuple
    endeffector: bool
    z_drop: float = 0.0


class _HopperKinematics:
    """Vertical-rail base plus two-joint leg, moving in the x-z plane.

    Every body point has position (a*sin(p1) + b*sin(p2), z - a*cos(p1)
    - b*cos(p2)) with p1 = q1, p2 = q1 + q2, so the mass matrix, velocity
    product and gravity terms reduce to closed forms in five aggregate
    constants over the point masses.
    """

    def __init__(self, model: RobotModel):
        self.model = model
        L1 = model.link_lengths[1]
        L2 = model.link_lengths[2]
        self.L1, self.L2 = L1, L2
        points = [(0.0, 0.0, model.link_masses[0])]
        for dist, m in _rod_points(model.link_masses[1], L1,
                                   model.link_com_offsets[1],
                                   model.link_inertias[1]):
            points.append((dist, 0.0, m))
        for dist, m in _rod_points(model.link_masses[2], L2,
                                   model.link_com_offsets[2],
                                   model.link_inertias[2]):
            points.append((L1, dist, m))
        a = np.array([p[0] for p in points])
        b = np.array([p[1] for p in points])
        m = np.array([p[2] for p in points])
        self.m_total = float(m.sum())
        self.A = float((m * a).sum())
        self.B = float((m * b).sum())
        self.C = float((m * a * a).sum())
        self.D = float((m * b * b).sum())
        self.E = float((m * a * b).sum())
        self.probes = [_Probe("foot", (L1, L2), True)]

    def terms_state(self, q, qd):
        return self.terms(q[1], q[2], qd[1], qd[2])

    def terms(self, q1, q2, qd1, qd2):
        """Mass matrix (upper triangle), velocity product and gravity terms
        as plain floats; the base coordinate enters none of them."""
        s1, c1 = math.sin(q1), math.cos(q1)
        p2 = q1 + q2
        s2, c2 = math.sin(p2), math.cos(p2)
        cq2 = math.cos(q2)
        sq2 = math.sin(q2)
        m01 = self.A * s1 + self.B * s2
        m02 = self.B * s2
        m11 = self.C + self.D + 2.0 * self.E * cq2
        m12 = self.D + self.E * cq2
        w1 = qd1
        w2 = qd1 + qd2
        h = (self.A * c1 * w1 * w1 + self.B * c2 * w2 * w2,
             self.E * sq2 * (w1 * w1 - w2 * w2),
             self.E * sq2 * w1 * w1)
        g = self.model.gravity
        grav = (g * self.m_total, g * m01, g * m02)
        return (self.m_total, m01, m02, m11, m12, self.D), h, grav

    def mass_matrix(self, q):
        M, _, _ = self.terms(q[1], q[2], 0.0, 0.0)
        m00, m01, m02, m11, m12, m22 = M
        return np.array([[m00, m01, m02], [m01, m11, m12], [m02, m12, m22]])

    def bias(self, q, qd):
        """Velocity product (Coriolis/centrifugal) generalized forces."""
        _, h, _ = self.terms(q[1], q[2], qd[1], qd[2])
        return np.array(h)

    def gravity_vector(self, q):
        _, _, g = self.terms(q[1], q[2], 0.0, 0.0)
        return np.array(g)

    def probe_scalar(self, q, probe):
        """Position and jacobian of a probe point, as scalar tuples."""
        a, b = probe.template
        s1, c1 = math.sin(q[1]), math.cos(q[1])
        p2 = q[1] + q[2]
        s2, c2 = math.sin(p2), math.cos(p2)
        pos = (a * s1 + b * s2, 0.0, q[0] - a * c1 - b * c2 - probe.z_drop)
        jac = ((0.0, a * c1 + b * c2, b * c2),
               (0.0, 0.0, 0.0),
               (1.0, a * s1 + b * s2, b * s2))
        return pos, jac

    def potential_energy(self, q):
        g = self.model.gravity
        c1 = math.cos(q[1])
        c2 = math.cos(q[1] + q[2])
        return g * (self.m_total * q[0] - self.A * c1 - self.B * c2)

    def point_position(self, q, template, z_drop=0.0):
        a, b = template
        s1, c1 = math.sin(q[1]), math.cos(q[1])
        p2 = q[1] + q[2]
        s2, c2 = math.sin(p2), math.cos(p2)
        return np.array([a * s1 + b * s2, 0.0,
                         q[0] - a * c1 - b * c2 - z_drop])

    def point_jacobian(self, q, template):
        a, b = template
        s1, c1 = math.sin(q[1]), math.cos(q[1])
        p2 = q[1] + q[2]
        s2, c2 = math.sin(p2), math.cos(p2)
        return np.array([[0.0, a * c1 + b * c2, b * c2],
                         [0.0, 0.0, 0.0],
                         [1.0, a * s1 + b * s2, b * s2]])

    def frames(self, q):
        s1, c1 = math.sin(q[1]), math.cos(q[1])
        p2 = q[1] + q[2]
        base = FramePose(np.array([0.0, 0.0, q[0]]), np.eye(3))
        thigh = FramePose(np.array([0.0, 0.0, q[0]]), _rot_y(q[1]))
        knee = np.array([self.L1 * s1, 0.0, q[0] - self.L1 * c1])
        shank = FramePose(knee, _rot_y(p2))
        return [base, thigh, shank]

    def endeffector(self, q):
        return self.point_position(q, self.probes[0].template)


class _ArmKinematics:
    """Fixed-base arm: two vertical-axis joints position the wrist in the
    horizontal plane at ``base_height``; the wrist joint pitches the tool
    below the plane (tool tip z = base_height - L3*sin(q3)).

    Body points follow the template
        x = a*c1 + (b + g*cos(q3)) * c12
        y = a*s1 + (b + g*cos(q3)) * s12
        z = base_height - g*sin(q3)
    with per-point constants (a, b, g) and c12 = cos(q1+q2) etc.
    """

    def __init__(self, model: RobotModel):
        self.model = model
        L1, L2, L3 = model.link_lengths
        self.L1, self.L2, self.L3 = L1, L2, L3
        pts = []
        for dist, m in _rod_points(model.link_masses[0], L1,
                                   model.link_com_offsets[0],
                                   model.link_inertias[0]):
            pts.append((dist, 0.0, 0.0, m))
        for dist, m in _rod_points(model.link_masses[1], L2,
                                   model.link_com_offsets[1],
                                   model.link_inertias[1]):
            pts.append((L1, dist, 0.0, m))
        for dist, m in _rod_points(model.link_masses[2], L3,
                                   model.link_com_offsets[2],
                                   model.link_inertias[2]):
            pts.append((L1, L2, dist, m))
        self._a = np.array([p[0] for p in pts])
        self._b = np.array([p[1] for p in pts])
        self._g = np.array([p[2] for p in pts])
        self._m = np.array([p[3] for p in pts])
        # Aggregate second moments for the closed-form mass matrix.
        m, a, b, g = self._m, self._a, self._b, self._g
        self.Kaa = float((m * a * a).sum())
        self.Kbb = float((m * b * b).sum())
        self.Kgg = float((m * g * g).sum())
        self.Kab = float((m * a * b).sum())
        self.Kag = float((m * a * g).sum())
        self.Kbg = float((m * b * g).sum())
        self.Sg = float((m * g).sum())
        self.probes = [
            _Probe("endeffector", (L1, L2, L3), True),
            _Probe("elbow", (L1, 0.0, 0.0), False, z_drop=0.02),
            _Probe("wrist", (L1, L2, 0.0), False, z_drop=0.02),
        ]

    def terms_state(self, q, qd):
        return self.terms(q[1], q[2], qd[0], qd[1], qd[2])

    def terms(self, q2, q3, qd1, qd2, qd3):
        """Mass matrix (upper triangle), velocity product and gravity terms
        as plain floats; q1 enters none of them (base yaw symmetry)."""
        s2, c2 = math.sin(q2), math.cos(q2)
        s3, c3 = math.sin(q3), math.cos(q3)
        # Quadratic form in (w1, w12, qd3), folded onto w12 = qd1 + qd2.
        Ku = self.Kbb + 2.0 * c3 * self.Kbg + c3 * c3 * self.Kgg
        Kau = self.Kab + c3 * self.Kag
        m00 = self.Kaa + Ku + 2.0 * Kau * c2
        m01 = Ku + Kau * c2
        m02 = -self.Kag * s3 * s2
        w1 = qd1
        w12 = qd1 + qd2
        w3 = qd3
        kug = self.Kbg + c3 * self.Kgg
        h0 = (Kau * s2 * (w1 * w1 - w12 * w12)
              - self.Kag * c3 * s2 * w3 * w3
              - 2.0 * s3 * w3 * w12 * (self.Kag * c2 + kug))
        h1 = Kau * s2 * w1 * w1 - 2.0 * s3 * w3 * w12 * kug
        h2 = s3 * (self.Kag * c2 * w1 * w1 + kug * w12 * w12)
        grav = (0.0, 0.0, -self.model.gravity * self.Sg * c3)
        return (m00, m01, m02, Ku, 0.0, self.Kgg), (h0, h1, h2), grav

    def mass_matrix(self, q):
        M, _, _ = self.terms(q[1], q[2], 0.0, 0.0, 0.0)
        m00, m01, m02, m11, m12, m22 = M
        return np.array([[m00, m01, m02], [m01, m11, m12], [m02, m12, m22]])

    def _trig(self, q):
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        t12 = q[0] + q[1]
        s12, c12 = math.sin(t12), math.cos(t12)
        s3, c3 = math.sin(q[2]), math.cos(q[2])
        return s1, c1, s12, c12, s3, c3

    def bias(self, q, qd):
        _, h, _ = self.terms(q[1], q[2], qd[0], qd[1], qd[2])
        return np.array(h)

    def gravity_vector(self, q):
        _, _, g = self.terms(q[1], q[2], 0.0, 0.0, 0.0)
        return np.array(g)

    def probe_scalar(self, q, probe):
        """Position and jacobian of a probe point, as scalar tuples."""
        a, b, g = probe.template
        s1, c1, s12, c12, s3, c3 = self._trig(q)
        u = b + g * c3
        pos = (a * c1 + u * c12, a * s1 + u * s12,
               self.model.base_height - g * s3 - probe.z_drop)
        jac = ((-a * s1 - u * s12, -u * s12, -g * s3 * c12),
               (a * c1 + u * c12, u * c12, -g * s3 * s12),
               (0.0, 0.0, -g * c3))
        return pos, jac

    def potential_energy(self, q):
        s3 = math.sin(q[2])
        z0 = self.model.base_height
        return self.model.gravity * (self._m.sum() * z0 - self.Sg * s3)

    def point_position(self, q, template, z_drop=0.0):
        a, b, g = template
        s1, c1, s12, c12, s3, c3 = self._trig(q)
        u = b + g * c3
        return np.array([a * c1 + u * c12, a * s1 + u * s12,
                         self.model.base_height - g * s3 - z_drop])

    def point_jacobian(self, q, template):
        a, b, g = template
        s1, c1, s12, c12, s3, c3 = self._trig(q)
        u = b + g * c3
        return np.array([
            [-a * s1 - u * s12, -u * s12, -g * s3 * c12],
            [a * c1 + u * c12, u * c12, -g * s3 * s12],
            [0.0, 0.0, -g * c3],
        ])

    def frames(self, q):
        s1, c1, s12, c12, s3, c3 = self._trig(q)
        z0 = self.model.base_height
        base = FramePose(np.array([0.0, 0.0, z0]), _rot_z(q[0]))
        elbow = FramePose(np.array([self.L1 * c1, self.L1 * s1, z0]),
                          _rot_z(q[0] + q[1]))
        wrist_o = np.array([self.L1 * c1 + self.L2 * c12,
                            self.L1 * s1 + self.L2 * s12, z0])
        wrist = FramePose(wrist_o, _rot_z(q[0] + q[1]) @ _rot_y(q[2]))
        return [base, elbow, wrist]

    def endeffector(self, q):
        return self.point_position(q, self.probes[0].template)


def _rot_y(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _require_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"invalid state: non-finite {what}")


def forward_kinematics(model: RobotModel, q):
    """Link frame poses plus the endeffector/foot point for configuration q."""
    q = np.asarray(q, dtype=float)
    _require_finite(q, "q")
    kin = model.kinematics
    return kin.frames(q), kin.endeffector(q)


def mass_matrix(model: RobotModel, q):
    q = np.asarray(q, dtype=float)
    _require_finite(q, "q")
    return model.kinematics.mass_matrix(q)


def gravity_vector(model: RobotModel, q):
    q = np.asarray(q, dtype=float)
    _require_finite(q, "q")
    return model.kinematics.gravity_vector(q)


def inverse_dynamics(model: RobotModel, q, qdot, qddot):
    """Generalized forces M(q) qddot + C(q, qdot) qdot + g(q).

    Joint friction, limit springs and contact are handled by :func:`step`
    and intentionally excluded here.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    for arr, name in ((q, "q"), (qdot, "qdot"), (qddot, "qddot")):
        _require_finite(arr, name)
    kin = model.kinematics
    return (kin.mass_matrix(q) @ qddot + kin.bias(q, qdot)
            + kin.gravity_vector(q))


def kinetic_energy(model: RobotModel, q, qdot):
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * float(qdot @ model.kinematics.mass_matrix(q) @ qdot)


def potential_energy(model: RobotModel, q):
    q = np.asarray(q, dtype=float)
    return float(model.kinematics.potential_energy(q))


def spring_energy(model: RobotModel, q, params: ContactParams = None):
    """Elastic energy stored in joint-limit springs and, when ``params`` is
    given, in the contact penalty springs at the current penetrations."""
    q = np.asarray(q, dtype=float)
    e = 0.0
    for i, (lo, hi) in enumerate(model.joint_position_limits):
        if q[i] > hi:
            e += 0.5 * model.limit_stiffness * (q[i] - hi) ** 2
        elif q[i] < lo:
            e += 0.5 * model.limit_stiffness * (q[i] - lo) ** 2
    if params is not None:
        kin = model.kinematics
        for probe in kin.probes:
            pen = params.surface_height - kin.point_position(
                q, probe.template, probe.z_drop)[2]
            if pen > 0.0:
                e += 0.5 * params.normal_stiffness * pen ** 2
    return e


def total_energy(model: RobotModel, state: EnvState,
                 params: ContactParams = None):
    """Kinetic plus gravitational energy, plus stored spring energy so the
    total is comparable across in-contact and contact-free samples."""
    return (kinetic_energy(model, state.q, state.qdot)
            + potential_energy(model, state.q)
            + spring_energy(model, state.q, params))


def _contact_law(pen, v_tangential, v_normal, stiffness, damping, friction,
                 v_reg):
    if pen <= 0.0:
        return 0.0, 0.0
    fn = stiffness * pen - damping * v_normal
    if fn <= 0.0:
        return 0.0, 0.0
    slip = v_tangential / v_reg
    if slip > 1.0:
        slip = 1.0
    elif slip < -1.0:
        slip = -1.0
    return fn, -friction * fn * slip


def contact_force(point_height, v_tangential, v_normal, params: ContactParams):
    """Penalty contact law for one point against a horizontal surface.

    Returns (normal, tangential) forces in newtons.  The normal force is a
    one-sided spring-damper on penetration, never negative.  The tangential
    force is regularized Coulomb friction: linear in the tangential velocity
    below ``regularization_velocity`` and saturated at mu * normal above it,
    signed against the slip direction.
    """
    return _contact_law(params.surface_height - point_height, v_tangential,
                        v_normal, params.normal_stiffness,
                        params.normal_damping, params.coulomb_friction,
                        params.regularization_velocity)


def _solve3(m00, m01, m02, m11, m12, m22, b0, b1, b2):
    """Solve a symmetric 3x3 system via the adjugate (fast scalar path)."""
    c00 = m11 * m22 - m12 * m12
    c01 = m02 * m12 - m01 * m22
    c02 = m01 * m12 - m02 * m11
    det = m00 * c00 + m01 * c01 + m02 * c02
    c11 = m00 * m22 - m02 * m02
    c12 = m01 * m02 - m00 * m12
    c22 = m00 * m11 - m01 * m01
    inv = 1.0 / det
    return ((c00 * b0 + c01 * b1 + c02 * b2) * inv,
            (c01 * b0 + c11 * b1 + c12 * b2) * inv,
            (c02 * b0 + c12 * b1 + c22 * b2) * inv)


def step(model: RobotModel, state: EnvState, torque, params: ContactParams,
         dt: float) -> EnvState:
    """Advance the state by one semi-implicit Euler step of size dt.

    Velocities are updated from accelerations first, then positions from the
    new velocities.  Contact forces are evaluated at the pre-step state and
    mapped through the contact point jacobians.  Actuated joint torques are
    clamped to the model limits; the contact damper is limited by the
    apparent mass at the contact point so the explicit integration cannot
    overshoot.  Deterministic: identical inputs give identical outputs.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must be in (0, 0.01]")
    if len(torque) != len(state.q):
        raise ValueError("torque dimension mismatch")
    kin = model.kinematics
    q = state.q
    qdv = state.qdot
    q0, q1, q2 = float(q[0]), float(q[1]), float(q[2])
    qd = (float(qdv[0]), float(qdv[1]), float(qdv[2]))
    tau = [float(torque[0]), float(torque[1]), float(torque[2])]
    for idx, limit in zip(model.actuated_indices, model.torque_limits):
        if tau[idx] > limit:
            tau[idx] = limit
        elif tau[idx] < -limit:
            tau[idx] = -limit

    (m00, m01, m02, m11, m12, m22), h, grav = kin.terms_state(q, qd)
    rhs = [tau[k] - h[k] - grav[k] - model.joint_damping[k] * qd[k]
           for k in range(3)]
    qk = (q0, q1, q2)
    for k, (lo, hi) in enumerate(model.joint_position_limits):
        if qk[k] > hi:
            rhs[k] -= model.limit_stiffness * (qk[k] - hi) \
                + model.limit_damping * qd[k]
        elif qk[k] < lo:
            rhs[k] -= model.limit_stiffness * (qk[k] - lo) \
                + model.limit_damping * qd[k]

    contacts = []
    for probe in kin.probes:
        pos, jac = kin.probe_scalar(q, probe)
        pen = params.surface_height - pos[2]
        if pen <= 0.0:
            continue
        jx, jy, jz = jac
        vx = jx[0] * qd[0] + jx[1] * qd[1] + jx[2] * qd[2]
        vy = jy[0] * qd[0] + jy[1] * qd[1] + jy[2] * qd[2]
        vz = jz[0] * qd[0] + jz[1] * qd[1] + jz[2] * qd[2]
        x = _solve3(m00, m01, m02, m11, m12, m22, jz[0], jz[1], jz[2])
        m_app_inv = jz[0] * x[0] + jz[1] * x[1] + jz[2] * x[2]
        damping = params.normal_damping
        if m_app_inv > 0.0:
            d_max = _DAMPING_CLAMP / (dt * m_app_inv)
            if damping > d_max:
                damping = d_max
        speed = math.hypot(vx, vy)
        fn, ft = _contact_law(pen, speed, vz, params.normal_stiffness,
                              damping, params.coulomb_friction,
                              params.regularization_velocity)
        if fn <= 0.0:
            continue
        if speed > 1e-12:
            fx = ft * vx / speed
            fy = ft * vy / speed
        else:
            fx = fy = 0.0
        rhs[0] += jx[0] * fx + jy[0] * fy + jz[0] * fn
        rhs[1] += jx[1] * fx + jy[1] * fy + jz[1] * fn
        rhs[2] += jx[2] * fx + jy[2] * fy + jz[2] * fn
        contacts.append(ContactPoint(probe.name, np.array(pos), pen,
                                     fn, ft, probe.endeffector))

    a0, a1, a2 = _solve3(m00, m01, m02, m11, m12, m22,
                         rhs[0], rhs[1], rhs[2])
    v0 = qd[0] + dt * a0
    v1 = qd[1] + dt * a1
    v2 = qd[2] + dt * a2
    n0 = q0 + dt * v0
    n1 = q1 + dt * v1
    n2 = q2 + dt * v2
    ok = (math.isfinite(n0) and math.isfinite(n1) and math.isfinite(n2)
          and abs(v0) < _DIVERGENCE_SPEED and abs(v1) < _DIVERGENCE_SPEED
          and abs(v2) < _DIVERGENCE_SPEED)
    if not ok:
        raise SimulationDivergedError("simulation diverged")
    return EnvState(np.array((n0, n1, n2)), np.array((v0, v1, v2)),
                    state.time + dt, contacts)
