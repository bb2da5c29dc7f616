"""Minimal articulated rigid-body engine for fixed-base hinge-joint trees.

Forward kinematics, geometric Jacobians, the joint-space inertia matrix
(composite-rigid-body algorithm), bias forces (recursive Newton-Euler),
and a semi-implicit Euler integrator with hard joint-limit clamping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .growth import BodyPart, BodySpec, GeomPrimitive

GRAVITY = (0.0, 0.0, -9.81)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = _skew(axis)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class Link:
    """One hinge joint plus the rigid body it moves.

    The joint rotates the link frame about `axis` through the frame origin;
    the frame rest pose in the parent is (offset_rot, offset_pos). Inertia
    is about the link COM, expressed in the link frame.
    """

    parent: int
    axis: tuple[float, float, float]
    offset_pos: tuple[float, float, float]
    mass: float
    inertia: np.ndarray
    com: tuple[float, float, float] = (0.0, 0.0, 0.0)
    offset_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    joint_range: tuple[float, float] = (-math.pi, math.pi)
    gear: float = 1.0
    name: str = ""

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        if abs(float(np.linalg.norm(ax)) - 1.0) > 1e-9:
            raise InvalidInputError(f"link {self.name!r}: axis must be unit length")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
            raise InvalidInputError(f"link {self.name!r}: inertia must be symmetric 3x3")
        if self.mass < 0:
            raise InvalidInputError(f"link {self.name!r}: mass must be nonnegative")


@dataclass(frozen=True)
class Site:
    """Named frame rigidly attached to a link."""

    link: int
    pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rot: np.ndarray = field(default_factory=lambda: np.eye(3))


class _ChainArrays:
    """Flat numpy views of the link data, built once per chain."""

    def __init__(self, links: list[Link]):
        n = len(links)
        self.parent = np.array([l.parent for l in links], dtype=int)
        self.axis = np.array([l.axis for l in links], dtype=float).reshape(n, 3)
        self.offset_pos = np.array([l.offset_pos for l in links], dtype=float).reshape(n, 3)
        self.offset_rot = np.array([np.asarray(l.offset_rot, dtype=float)
                                    for l in links]).reshape(n, 3, 3)
        self.mass = np.array([l.mass for l in links], dtype=float)
        self.inertia = np.array([np.asarray(l.inertia, dtype=float)
                                 for l in links]).reshape(n, 3, 3)
        self.com = np.array([l.com for l in links], dtype=float).reshape(n, 3)
        self.ranges = np.array([l.joint_range for l in links], dtype=float).reshape(n, 2)
        self.gears = np.array([l.gear for l in links], dtype=float)
        # joint axis pre-rotated into the parent frame
        self.axis_in_parent = np.einsum("nij,nj->ni", self.offset_rot, self.axis)
        # ancestor[i, j] = 1 if j lies on the root-to-i path (including i);
        # turns prefix sums along the tree into a single matmul
        anc = np.zeros((n, n))
        for i in range(n):
            j = i
            while j >= 0:
                anc[i, j] = 1.0
                j = self.parent[j]
        self.ancestor = anc


@dataclass
class KinematicChain:
    links: list[Link]
    sites: dict[str, Site] = field(default_factory=dict)
    gravity: tuple[float, float, float] = GRAVITY

    def __post_init__(self):
        for i, link in enumerate(self.links):
            if not (-1 <= link.parent < i):
                raise InvalidInputError(f"link {i}: parent index must precede the link")
        for name, site in self.sites.items():
            if not (-1 <= site.link < self.n):
                raise InvalidInputError(f"site {name!r}: unknown link {site.link}")
        self._arrays: _ChainArrays | None = None
        self._fk_cache: tuple[bytes, np.ndarray, np.ndarray] | None = None

    @property
    def arrays(self) -> _ChainArrays:
        if self._arrays is None:
            self._arrays = _ChainArrays(self.links)
        return self._arrays

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def joint_ranges(self) -> np.ndarray:
        return self.arrays.ranges

    @property
    def gears(self) -> np.ndarray:
        return self.arrays.gears

    def joint_names(self) -> list[str]:
        return [l.name or f"joint_{i}" for i, l in enumerate(self.links)]


@dataclass
class ChainState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != self.qdot.shape or self.q.ndim != 1:
            raise InvalidInputError("q and qdot must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise InvalidInputError("state must be finite")

    @classmethod
    def zeros(cls, n: int) -> "ChainState":
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class SitePose:
    position: np.ndarray
    rotation: np.ndarray


def _check_q(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n,):
        raise InvalidInputError(f"expected q of length {chain.n}, got shape {q.shape}")
    return q


def _link_frames(chain: KinematicChain, q: np.ndarray):
    """World rotation and origin of every link frame (cached per q)."""
    key = q.tobytes()
    cached = chain._fk_cache
    if cached is not None and cached[0] == key:
        return cached[1], cached[2]
    arr = chain.arrays
    n = chain.n
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    # batch the joint rotations (Rodrigues), then compose along the tree
    sin_q = np.sin(q)
    cos_q = np.cos(q)
    for i in range(n):
        par = arr.parent[i]
        a = arr.axis[i]
        K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
        Rj = np.eye(3) + sin_q[i] * K + (1.0 - cos_q[i]) * (K @ K)
        if par < 0:
            p[i] = arr.offset_pos[i]
            R[i] = arr.offset_rot[i] @ Rj
        else:
            p[i] = p[par] + R[par] @ arr.offset_pos[i]
            R[i] = R[par] @ arr.offset_rot[i] @ Rj
    chain._fk_cache = (key, R, p)
    return R, p


def forward_kinematics(chain: KinematicChain, q: np.ndarray) -> dict[str, SitePose]:
    """World pose of every site (link frames are exposed via site_pose)."""
    q = _check_q(chain, q)
    R, p = _link_frames(chain, q)
    poses = {}
    for name, site in chain.sites.items():
        if site.link < 0:
            Rw, pw = np.eye(3), np.zeros(3)
        else:
            Rw, pw = R[site.link], p[site.link]
        poses[name] = SitePose(pw + Rw @ np.asarray(site.pos), Rw @ np.asarray(site.rot))
    return poses


def site_pose(chain: KinematicChain, q: np.ndarray, site: str) -> SitePose:
    if site not in chain.sites:
        raise InvalidInputError(f"unknown site {site!r}")
    q = _check_q(chain, q)
    R, p = _link_frames(chain, q)
    s = chain.sites[site]
    if s.link < 0:
        Rw, pw = np.eye(3), np.zeros(3)
    else:
        Rw, pw = R[s.link], p[s.link]
    return SitePose(pw + Rw @ np.asarray(s.pos), Rw @ np.asarray(s.rot))


def jacobian(chain: KinematicChain, q: np.ndarray, site: str) -> np.ndarray:
    """Geometric Jacobian (3 linear rows, then 3 angular rows)."""
    if site not in chain.sites:
        raise InvalidInputError(f"unknown site {site!r}")
    q = _check_q(chain, q)
    R, p = _link_frames(chain, q)
    s = chain.sites[site]
    if s.link < 0:
        return np.zeros((6, chain.n))
    p_site = p[s.link] + R[s.link] @ np.asarray(s.pos)
    arr = chain.arrays
    J = np.zeros((6, chain.n))
    j = s.link
    while j >= 0:
        par = arr.parent[j]
        a = arr.axis_in_parent[j] if par < 0 else R[par] @ arr.axis_in_parent[j]
        J[:3, j] = np.cross(a, p_site - p[j])
        J[3:, j] = a
        j = par
    return J


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors (avoids np.cross axis handling)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _world_inertias(chain: KinematicChain, R: np.ndarray, p: np.ndarray):
    """COM position and rotational inertia about COM, in world frame."""
    arr = chain.arrays
    coms = p + np.einsum("nij,nj->ni", R, arr.com)
    Ics = np.einsum("nij,njk,nlk->nil", R, arr.inertia, R)
    return coms, Ics


def _spatial_inertias_origin(mass: np.ndarray, coms: np.ndarray,
                             Ics: np.ndarray) -> np.ndarray:
    """(n, 6, 6) spatial inertias about the world origin (angular block first)."""
    n = len(mass)
    cx = np.zeros((n, 3, 3))
    x, y, z = coms[:, 0], coms[:, 1], coms[:, 2]
    cx[:, 0, 1] = -z
    cx[:, 0, 2] = y
    cx[:, 1, 0] = z
    cx[:, 1, 2] = -x
    cx[:, 2, 0] = -y
    cx[:, 2, 1] = x
    m = mass[:, None, None]
    I6 = np.zeros((n, 6, 6))
    I6[:, :3, :3] = Ics - m * (cx @ cx)
    I6[:, :3, 3:] = m * cx
    I6[:, 3:, :3] = -m * cx
    I6[:, 3:, 3:] = m * np.eye(3)
    return I6


def _world_axes(chain: KinematicChain, R: np.ndarray) -> np.ndarray:
    arr = chain.arrays
    rotated = np.einsum("nij,nj->ni", R[arr.parent], arr.axis_in_parent)
    return np.where((arr.parent >= 0)[:, None], rotated, arr.axis_in_parent)


def _joint_twists(chain: KinematicChain, R: np.ndarray, p: np.ndarray) -> np.ndarray:
    """World-origin Pluecker twist (omega, v_origin) of each joint."""
    axes = _world_axes(chain, R)
    S = np.empty((chain.n, 6))
    S[:, :3] = axes
    S[:, 3:] = np.cross(p, axes)
    return S


def mass_matrix(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Joint-space inertia matrix via the composite-rigid-body algorithm."""
    q = _check_q(chain, q)
    n = chain.n
    M = np.zeros((n, n))
    if n == 0:
        return M
    arr = chain.arrays
    R, p = _link_frames(chain, q)
    coms, Ics = _world_inertias(chain, R, p)
    S = _joint_twists(chain, R, p)
    Ic6 = _spatial_inertias_origin(arr.mass, coms, Ics)
    for i in range(n - 1, -1, -1):
        parent = arr.parent[i]
        if parent >= 0:
            Ic6[parent] = Ic6[parent] + Ic6[i]
        F = Ic6[i] @ S[i]
        M[i, i] = S[i] @ F
        j = parent
        while j >= 0:
            M[i, j] = M[j, i] = S[j] @ F
            j = arr.parent[j]
    return M


def inverse_dynamics(chain: KinematicChain, q: np.ndarray, qdot: np.ndarray,
                     qddot: np.ndarray, use_gravity: bool = True) -> np.ndarray:
    """Joint torques realizing qddot at (q, qdot): recursive Newton-Euler."""
    q = _check_q(chain, q)
    qdot = _check_q(chain, qdot)
    qddot = _check_q(chain, qddot)
    n = chain.n
    tau = np.zeros(n)
    if n == 0:
        return tau
    R, p = _link_frames(chain, q)
    coms, Ics = _world_inertias(chain, R, p)
    g = np.asarray(chain.gravity) if use_gravity else np.zeros(3)

    arr = chain.arrays
    axes = _world_axes(chain, R)
    par = arr.parent
    has_par = (par >= 0)[:, None]
    anc = arr.ancestor

    # Forward pass: angular velocity/acceleration and frame-origin linear
    # acceleration telescope along the root-to-link path, so each is the
    # ancestor-matrix sum of per-edge contributions.
    omega = anc @ (axes * qdot[:, None])
    omega_par = np.where(has_par, omega[par], 0.0)
    alpha = anc @ (axes * qddot[:, None]
                   + np.cross(omega_par, axes) * qdot[:, None])
    alpha_par = np.where(has_par, alpha[par], 0.0)
    d = p - np.where(has_par, p[par], 0.0)
    a_origin = -g + anc @ (np.cross(alpha_par, d)
                           + np.cross(omega_par, np.cross(omega_par, d)))

    # Net force/moment each body exerts, about its own frame origin.
    r_c = coms - p
    a_com = a_origin + np.cross(alpha, r_c) \
        + np.cross(omega, np.cross(omega, r_c))
    F = arr.mass[:, None] * a_com
    Iom = np.einsum("nij,nj->ni", Ics, omega)
    N = np.einsum("nij,nj->ni", Ics, alpha) + np.cross(omega, Iom)
    f = F.copy()
    n_torque = N + np.cross(r_c, F)
    for i in range(n - 1, -1, -1):
        tau[i] = axes[i] @ n_torque[i]
        pa = par[i]
        if pa >= 0:
            f[pa] += f[i]
            n_torque[pa] += n_torque[i] + _cross3(p[i] - p[pa], f[i])
    return tau


def bias_forces(chain: KinematicChain, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Coriolis, centrifugal, and gravity torques h in M qdd + h = tau."""
    return inverse_dynamics(chain, q, qdot, np.zeros(chain.n), use_gravity=True)


def step(chain: KinematicChain, state: ChainState, tau: np.ndarray,
         dt: float = 0.005, M: np.ndarray | None = None,
         h: np.ndarray | None = None) -> ChainState:
    """Semi-implicit Euler step with hard joint-limit clamping.

    Callers that already computed the mass matrix or bias forces for the
    current state (e.g. a controller) may pass them to avoid recomputation.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    tau = _check_q(chain, tau)
    if M is None:
        M = mass_matrix(chain, state.q)
    if h is None:
        h = bias_forces(chain, state.q, state.qdot)
    if chain.n == 0:
        return ChainState(state.q.copy(), state.qdot.copy())
    qddot = np.linalg.solve(M, tau - h)
    qdot = state.qdot + qddot * dt
    q = state.q + qdot * dt
    ranges = chain.joint_ranges
    low = q < ranges[:, 0]
    high = q > ranges[:, 1]
    q = np.clip(q, ranges[:, 0], ranges[:, 1])
    qdot = np.where(low | high, 0.0, qdot)
    return ChainState(q, qdot)


def kinetic_energy(chain: KinematicChain, state: ChainState) -> float:
    M = mass_matrix(chain, state.q)
    return 0.5 * float(state.qdot @ M @ state.qdot)


# ---------------------------------------------------------------------------
# primitive inertia and BodySpec conversion


def primitive_inertia(geom: GeomPrimitive, mass: float) -> np.ndarray:
    """Rotational inertia about the COM for a uniform-density primitive.

    Capsules are aligned with the local z axis; inertias compose the
    cylinder with two hemispherical caps (exact closed forms).
    """
    if geom.kind == "sphere":
        (r,) = geom.dims
        return (2.0 / 5.0) * mass * r * r * np.eye(3)
    if geom.kind == "box":
        hx, hy, hz = geom.dims
        return mass / 3.0 * np.diag([hy * hy + hz * hz,
                                     hx * hx + hz * hz,
                                     hx * hx + hy * hy])
    r, hl = geom.dims
    L = 2.0 * hl
    v_cyl = math.pi * r * r * L
    v_sph = 4.0 / 3.0 * math.pi * r**3
    m_cyl = mass * v_cyl / (v_cyl + v_sph)
    m_sph = mass - m_cyl
    m_hemi = m_sph / 2.0
    izz = 0.5 * m_cyl * r * r + (2.0 / 5.0) * m_sph * r * r
    d = hl + 3.0 * r / 8.0  # capsule center to hemisphere COM
    ixx = m_cyl * (L * L / 12.0 + r * r / 4.0) \
        + 2.0 * ((83.0 / 320.0) * m_hemi * r * r + m_hemi * d * d)
    return np.diag([ixx, ixx, izz])


def _shift_inertia(Ic: np.ndarray, mass: float, d: np.ndarray) -> np.ndarray:
    """Parallel-axis shift: inertia about a point displaced by d from the COM."""
    dx = _skew(d)
    return Ic - mass * dx @ dx


def _merge_bodies(bodies: list[tuple[float, np.ndarray, np.ndarray]]):
    """Combine (mass, com, inertia-about-com) triples in a common frame."""
    m_tot = sum(b[0] for b in bodies)
    if m_tot == 0.0:
        return 0.0, np.zeros(3), np.zeros((3, 3))
    com = sum(b[0] * b[1] for b in bodies) / m_tot
    I = np.zeros((3, 3))
    for m, c, Ic in bodies:
        I += _shift_inertia(Ic, m, c - com)
    return m_tot, com, I


def chain_from_body_spec(spec: BodySpec, root_part: str, fixed_base: bool = True,
                         gravity=GRAVITY) -> KinematicChain:
    """Build a hinge chain from the body subtree below root_part.

    The root part itself is fixed to the world. Each joint entry becomes a
    hinge link named `<part>_<k>`; when a part has several joints the
    intermediate links are massless and the final one carries the part's
    mass and primitive inertia. Jointless parts are rigidly folded into
    the nearest jointed ancestor (parallel-axis shifted). One site per
    part, named after it, sits at the part frame origin.
    """
    if not fixed_base:
        raise InvalidInputError("only fixed-base chains are supported")
    parts = spec.parts()
    if root_part not in parts:
        raise InvalidInputError(f"unknown root part {root_part!r}")

    links: list[Link] = []
    sites: dict[str, Site] = {}
    # (mass, com, Ic) contributions in each link's frame, merged at the end
    contrib: dict[int, list[tuple[float, np.ndarray, np.ndarray]]] = {}

    def visit(part: BodyPart, parent_link: int, offset_from_parent_link: np.ndarray,
              is_root: bool):
        offset = np.zeros(3) if is_root else np.asarray(part.offset, dtype=float)
        pos = offset_from_parent_link + offset
        inertia = primitive_inertia(part.geom, part.mass)
        if part.joints and not is_root:
            link_idx = parent_link
            link_pos = pos
            for k, joint in enumerate(part.joints):
                links.append(Link(
                    parent=link_idx,
                    axis=joint.axis,
                    offset_pos=tuple(link_pos),
                    mass=0.0,
                    inertia=np.zeros((3, 3)),
                    joint_range=joint.range,
                    gear=joint.gear,
                    name=f"{part.name}_{k}",
                ))
                link_idx = len(links) - 1
                link_pos = np.zeros(3)
            contrib.setdefault(link_idx, []).append(
                (part.mass, np.zeros(3), inertia))
            sites[part.name] = Site(link=link_idx, pos=(0.0, 0.0, 0.0))
            child_base = np.zeros(3)
        else:
            # rigid with the carrying link (or the fixed world for the root)
            link_idx = parent_link
            contrib.setdefault(link_idx, []).append((part.mass, pos, inertia))
            sites[part.name] = Site(link=link_idx, pos=tuple(pos))
            child_base = pos
        for child in part.children:
            visit(child, link_idx, child_base, False)

    visit(parts[root_part], -1, np.zeros(3), True)

    merged: list[Link] = []
    for i, link in enumerate(links):
        m, com, Ic = _merge_bodies(contrib.get(i, []))
        merged.append(Link(
            parent=link.parent,
            axis=link.axis,
            offset_pos=link.offset_pos,
            mass=m,
            inertia=Ic,
            com=tuple(com),
            joint_range=link.joint_range,
            gear=link.gear,
            name=link.name,
        ))
    return KinematicChain(links=merged, sites=sites, gravity=tuple(gravity))
