"""Prioritized operational-space control.

Computes joint torques that drive end-effector sites toward targets under
three error metrics (position, orientation, vector alignment), with
lower-priority tasks projected into the null space of higher ones via the
dynamically consistent generalized inverse, and actuation restricted to a
selected joint subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ChainState, KinematicChain, SitePose, bias_forces, jacobian, mass_matrix, site_pose
from .errors import DegenerateTargetError, InvalidInputError

METRICS = ("position", "orientation", "alignment")

DEFAULT_KP = 50.0
DEFAULT_KD = 10.0
DEFAULT_DAMPING = 1e-6


@dataclass(frozen=True)
class TaskSpec:
    """One prioritized control objective (priority 1 = highest)."""

    priority: int
    site: str
    metric: str
    target: np.ndarray  # 3-vector (position, alignment) or 3x3 rotation (orientation)
    site_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    kp: float = DEFAULT_KP
    kd: float = DEFAULT_KD

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidInputError(f"metric must be one of {METRICS}")
        target = np.asarray(self.target, dtype=float)
        want = (3, 3) if self.metric == "orientation" else (3,)
        if target.shape != want:
            raise InvalidInputError(f"{self.metric} target must have shape {want}")
        if self.kp < 0 or self.kd < 0 or not np.isfinite([self.kp, self.kd]).all():
            raise InvalidInputError("gains must be finite and nonnegative")
        ax = np.asarray(self.site_axis, dtype=float)
        if abs(np.linalg.norm(ax) - 1.0) > 1e-9:
            raise InvalidInputError("site_axis must be unit length")


@dataclass(frozen=True)
class JointSelection:
    """Boolean mask of commanded joints."""

    mask: tuple[bool, ...]

    def __post_init__(self):
        if not any(self.mask):
            raise InvalidInputError("at least one joint must be selected")

    @classmethod
    def all(cls, n: int) -> "JointSelection":
        return cls(tuple([True] * n))

    @classmethod
    def from_names(cls, chain: KinematicChain, names) -> "JointSelection":
        known = chain.joint_names()
        unknown = set(names) - set(known)
        if unknown:
            raise InvalidInputError(f"unknown joints: {sorted(unknown)}")
        wanted = set(names)
        return cls(tuple(n in wanted for n in known))


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix.

    At angle pi the axis sign is ambiguous; the axis whose largest-magnitude
    component is lexicographically first is taken with positive sign.
    """
    tr = float(np.trace(R))
    cos_angle = max(-1.0, min(1.0, (tr - 1.0) / 2.0))
    angle = float(np.arccos(cos_angle))
    if angle < 1e-12:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # R ~ 2*aa^T - I at angle pi
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
        k = int(np.argmax(axis))
        if axis[k] > 0:
            axis = A[:, k] / axis[k]
            axis /= np.linalg.norm(axis)
        if axis[np.argmax(np.abs(axis))] < 0:
            axis = -axis
        return axis * angle
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * (angle / (2.0 * np.sin(angle)))


def task_error(task: TaskSpec, pose: SitePose) -> np.ndarray:
    """3-vector task error for a site pose."""
    target = np.asarray(task.target, dtype=float)
    if task.metric == "position":
        return target - pose.position
    if task.metric == "orientation":
        return rotation_log(target @ pose.rotation.T)
    d = target - pose.position
    norm = np.linalg.norm(d)
    if norm < 1e-9:
        raise DegenerateTargetError("alignment target coincides with the site")
    u = pose.rotation @ np.asarray(task.site_axis, dtype=float)
    return np.cross(u, d / norm)


def _task_jacobian(chain: KinematicChain, q: np.ndarray, task: TaskSpec) -> np.ndarray:
    J = jacobian(chain, q, task.site)
    return J[:3] if task.metric == "position" else J[3:]


def task_priority_torques(chain: KinematicChain, state: ChainState,
                          tasks: list[TaskSpec], selection: JointSelection | None = None,
                          damping: float = DEFAULT_DAMPING,
                          return_dynamics: bool = False):
    """Joint torques realizing a prioritized task stack.

    Each task Jacobian is restricted to the selected joints and projected
    into the null space of all higher-priority tasks through the
    dynamically consistent inverse; task forces are PD on the task error
    with damping-regularized operational-space inertia. Output torque is
    exactly zero on unselected joints; bias forces are compensated on the
    selected ones.

    With return_dynamics=True, also returns the mass matrix and bias
    forces evaluated at ``state`` so the caller can reuse them.
    """
    if not tasks:
        raise InvalidInputError("need at least one task")
    prios = [t.priority for t in tasks]
    if len(set(prios)) != len(prios):
        raise InvalidInputError("duplicate task priorities")
    if sorted(prios) != prios:
        raise InvalidInputError("tasks must be ordered by priority")
    n = chain.n
    if selection is None:
        selection = JointSelection.all(n)
    if len(selection.mask) != n:
        raise InvalidInputError("selection mask length must equal joint count")
    sel = np.asarray(selection.mask, dtype=bool)

    M = mass_matrix(chain, state.q)
    Minv = np.linalg.inv(M)
    h = bias_forces(chain, state.q, state.qdot)
    poses = {t.site: site_pose(chain, state.q, t.site) for t in tasks}

    tau = np.zeros(n)
    N = np.eye(n)
    lam2 = damping * damping
    for task in tasks:
        J = _task_jacobian(chain, state.q, task)
        J = J * sel[None, :]
        e = task_error(task, poses[task.site])
        Jt = J @ N
        Lam = _damped_inverse(Jt @ Minv @ Jt.T, lam2)
        F = Lam @ (task.kp * e - task.kd * (J @ state.qdot))
        tau += Jt.T @ F
        Jbar = Minv @ Jt.T @ Lam
        N = N @ (np.eye(n) - Jbar @ Jt)
    tau += np.where(sel, h, 0.0)
    return (tau, M, h) if return_dynamics else tau


def _damped_inverse(A: np.ndarray, lam2: float) -> np.ndarray:
    """Damped inverse of the symmetric operational-space matrix A.

    Directions whose eigenvalue is negligible carry no usable task
    capacity (the task was projected out by higher priorities); they are
    truncated instead of damped, since 1/(eps + lam^2) would amplify
    projector roundoff into large spurious torques.
    """
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    cutoff = 1e-10 * max(1.0, float(w[-1]))
    inv_w = np.where(w > cutoff, 1.0 / (w + lam2), 0.0)
    return (V * inv_w[None, :]) @ V.T
