"""Desk-scale experiment runners behind the CLI subcommands.

All runners are deterministic functions of their explicit seeds and
configuration and return plain table-like results; file writing and
figure rendering live in the CLI layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import JointSelection, TaskSpec, task_error, task_priority_torques
from .delays import DelayLine
from .dynamics import (
    ChainState,
    KinematicChain,
    Site,
    chain_from_body_spec,
    site_pose,
    step,
)
from .errors import ConfigError
from .growth import BodySpec, GrowthCurve, build_body_spec, eval_curve, geom_volume
from .vision import (
    AcuityTable,
    FoveationParams,
    ImageBuffer,
    acuity_for_age,
    apply_csf_filter,
    foveate,
)

TIMESTEP_S = 0.005
STRENGTH_STEPS = 500
REACH_STEPS = 500

# behavior name -> (part owning the joint, joint index within the part)
BEHAVIOR_JOINTS = {
    "head_lift": "head_0",
    "leg_lift": "right_upper_leg_0",
}

# (hand kp, hand kd, eye kp, eye kd): increasingly stronger attraction
GAIN_SETS = (
    (15.0, 6.0, 8.0, 3.0),
    (50.0, 10.0, 20.0, 5.0),
    (100.0, 20.0, 32.0, 8.0),
)
DEFAULT_GAIN_SET = 1


# ---------------------------------------------------------------------------
# growth curves


def run_growth_curves(ages, curves: dict[str, GrowthCurve], template: BodySpec):
    """Rows of (age, height_cm, head_circumference_cm, total_mass_kg)."""
    for name in ("height", "head_circumference"):
        if name not in curves:
            raise ConfigError(f"missing growth table for {name!r}")
    rows = []
    for age in ages:
        spec = build_body_spec(template, age, curves)
        rows.append((
            float(age),
            eval_curve(curves["height"], age),
            eval_curve(curves["head_circumference"], age),
            spec.total_mass(),
        ))
    return rows


# ---------------------------------------------------------------------------
# strength test


def _behavior_joint_index(chain: KinematicChain, behavior: str) -> int:
    if behavior not in BEHAVIOR_JOINTS:
        raise ConfigError(f"unknown behavior {behavior!r}; "
                          f"choose from {sorted(BEHAVIOR_JOINTS)}")
    name = BEHAVIOR_JOINTS[behavior]
    names = chain.joint_names()
    if name not in names:
        raise ConfigError(f"behavior joint {name!r} missing from the chain")
    return names.index(name)


@dataclass
class StrengthResult:
    age: float
    behavior: str
    t_s: np.ndarray
    q: np.ndarray          # full joint trajectory, (steps, n)
    qdot: np.ndarray
    joint_index: int
    time_to_limit_steps: int | None


def run_strength_test(template: BodySpec, curves, age: float, behavior: str,
                      steps: int = STRENGTH_STEPS, dt: float = TIMESTEP_S,
                      hold_omega: float = 20.0,
                      hold_zeta: float = 1.0) -> StrengthResult:
    """Drive one joint at maximum gear torque from rest and record angles.

    All other joints are servoed to their start pose (gravity-compensated
    PD) so the lift reads out cleanly against gravity alone. The hold
    gains are scaled per joint by the start-pose inertia so the servo
    frequency is `hold_omega` on every joint regardless of age; a fixed
    kp would exceed the integrator's stability bound on the lightest
    joints of the youngest bodies.
    """
    spec = build_body_spec(template, age, curves)
    chain = chain_from_body_spec(spec, "torso")
    j = _behavior_joint_index(chain, behavior)
    limit = chain.joint_ranges[j, 1]
    n = chain.n
    state = ChainState.zeros(n)
    q0 = state.q.copy()
    from .dynamics import bias_forces, mass_matrix

    inertia0 = np.diag(mass_matrix(chain, q0))
    kp = hold_omega * hold_omega * inertia0
    kd = 2.0 * hold_zeta * hold_omega * inertia0
    qs = np.empty((steps, n))
    qds = np.empty((steps, n))
    hit = None

    for k in range(steps):
        h = bias_forces(chain, state.q, state.qdot)
        tau = h + kp * (q0 - state.q) - kd * state.qdot
        tau[j] = chain.gears[j]
        state = step(chain, state, tau, dt, h=h)
        qs[k] = state.q
        qds[k] = state.qdot
        if hit is None and state.q[j] >= limit - 1e-12:
            hit = k + 1
    return StrengthResult(
        age=float(age), behavior=behavior,
        t_s=np.arange(1, steps + 1) * dt,
        q=qs, qdot=qds, joint_index=j, time_to_limit_steps=hit,
    )


# ---------------------------------------------------------------------------
# reaching with the task-priority controller


def reach_chain(template: BodySpec, curves, age: float = 18.0) -> KinematicChain:
    """Age-specific fixed-torso chain with an eye site on the head."""
    spec = build_body_spec(template, age, curves)
    chain = chain_from_body_spec(spec, "torso")
    head = chain.sites["head"]
    eye_r = spec.parts()["head"].geom.dims[0]
    chain.sites["eye"] = Site(link=head.link,
                              pos=(head.pos[0] + 0.8 * eye_r, head.pos[1], head.pos[2]))
    return chain


def _shoulder_and_extension(chain: KinematicChain):
    """Right shoulder location at rest and the arm's maximum extension."""
    q0 = np.zeros(chain.n)
    shoulder = site_pose(chain, q0, "right_upper_arm").position
    hand = site_pose(chain, q0, "right_hand").position
    return shoulder, float(np.linalg.norm(hand - shoulder))


def sample_targets(chain: KinematicChain, seed: int, count: int = 10) -> np.ndarray:
    """Seeded reachable targets: uniform in a shell between 50% and 95% of
    the maximum arm extension, biased to the front hemisphere."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))
    shoulder, reach = _shoulder_and_extension(chain)
    targets = np.empty((count, 3))
    i = 0
    while i < count:
        v = np.array([rng.random(), rng.random(), rng.random()]) * 2.0 - 1.0
        norm = np.linalg.norm(v)
        if norm < 1e-6 or norm > 1.0:
            continue
        d = v / norm
        # keep targets in front (so the eyes can align), not far across the
        # midline, and at most slightly above the shoulder: the elbow flexes
        # one way only, so high or cross-body targets sit outside the arm's
        # usable workspace
        if d[0] < 0.25 or d[1] > 0.3 or d[1] < -0.75 or d[2] > 0.25:
            continue
        r = (0.5 + 0.45 * rng.random()) * reach
        targets[i] = shoulder + d * r
        i += 1
    return targets


@dataclass
class ReachTrace:
    target: np.ndarray
    t_s: np.ndarray
    distance_m: np.ndarray
    misalign_deg: np.ndarray
    hand_path: np.ndarray
    final_q: np.ndarray

    @property
    def time_to_target_steps(self) -> int | None:
        hits = np.nonzero(self.distance_m < 0.01)[0]
        return int(hits[0]) + 1 if hits.size else None

    @property
    def tortuosity(self) -> float:
        segs = np.linalg.norm(np.diff(self.hand_path, axis=0), axis=1)
        straight = float(np.linalg.norm(self.hand_path[-1] - self.hand_path[0]))
        return float(segs.sum() / straight) if straight > 1e-9 else math.inf


def _misalign_deg(chain, q, site, axis, target) -> float:
    pose = site_pose(chain, q, site)
    u = pose.rotation @ np.asarray(axis, dtype=float)
    d = np.asarray(target) - pose.position
    d = d / np.linalg.norm(d)
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(u, d))),
                                   float(u @ d)))


def run_reach_episode(chain: KinematicChain, target: np.ndarray,
                      gains=GAIN_SETS[DEFAULT_GAIN_SET],
                      steps: int = REACH_STEPS, dt: float = TIMESTEP_S,
                      sensory_delay: int = 0, motor_delay: int = 1) -> ReachTrace:
    """One reaching episode: priority 1 hand position, priority 2 eye
    alignment, with FIFO delays on proprioception and motor commands.

    The motor delay defaults to one timestep (commands selected at step t
    execute at t+1), matching a static-target setting.
    """
    kp_hand, kd_hand, kp_eye, kd_eye = gains
    n = chain.n
    eye_axis = (1.0, 0.0, 0.0)
    tasks = [
        TaskSpec(1, "right_hand", "position", np.asarray(target, float),
                 kp=kp_hand, kd=kd_hand),
        TaskSpec(2, "eye", "alignment", np.asarray(target, float),
                 site_axis=eye_axis, kp=kp_eye, kd=kd_eye),
    ]
    names = chain.joint_names()
    commanded = [nm for nm in names
                 if nm.startswith(("right_upper_arm", "right_lower_arm",
                                   "right_hand", "head"))]
    selection = JointSelection.from_names(chain, commanded)

    state = ChainState.zeros(n)
    line_q = DelayLine(sensory_delay, state.q)
    line_qd = DelayLine(sensory_delay, state.qdot)
    line_tau = DelayLine(motor_delay, np.zeros(n))

    dist = np.empty(steps)
    mis = np.empty(steps)
    path = np.empty((steps + 1, 3))
    path[0] = site_pose(chain, state.q, "right_hand").position
    for k in range(steps):
        q_obs = line_q.step(state.q)
        qd_obs = line_qd.step(state.qdot)
        tau_cmd, M, h = task_priority_torques(chain, ChainState(q_obs, qd_obs),
                                              tasks, selection,
                                              return_dynamics=True)
        tau = line_tau.step(tau_cmd)
        if sensory_delay == 0:
            state = step(chain, state, tau, dt, M=M, h=h)
        else:
            state = step(chain, state, tau, dt)
        hand = site_pose(chain, state.q, "right_hand").position
        path[k + 1] = hand
        dist[k] = float(np.linalg.norm(hand - np.asarray(target)))
        mis[k] = _misalign_deg(chain, state.q, "eye", eye_axis, target)
    return ReachTrace(
        target=np.asarray(target, float),
        t_s=np.arange(1, steps + 1) * dt,
        distance_m=dist,
        misalign_deg=mis,
        hand_path=path,
        final_q=state.q.copy(),
    )


def run_reach_set(chain: KinematicChain, targets: np.ndarray, gains,
                  steps: int = REACH_STEPS, sensory_delay: int = 0,
                  motor_delay: int = 1) -> list[ReachTrace]:
    return [
        run_reach_episode(chain, t, gains, steps=steps,
                          sensory_delay=sensory_delay, motor_delay=motor_delay)
        for t in targets
    ]


# ---------------------------------------------------------------------------
# vision demo


def run_vision_pipeline(img: ImageBuffer, acuity: float,
                        warp: FoveationParams,
                        foveation_first: bool = False):
    """Returns (acuity-only, foveation-only, combined) images."""
    blurred = apply_csf_filter(img, acuity)
    foveated = foveate(img, warp)
    if foveation_first:
        combined = apply_csf_filter(foveate(img, warp), acuity)
    else:
        combined = foveate(apply_csf_filter(img, acuity), warp)
    return blurred, foveated, combined


def high_frequency_energy(img: ImageBuffer) -> float:
    """Sum of the squared discrete Laplacian over all channels."""
    total = 0.0
    for ch in range(img.channels):
        x = img.data[:, :, ch]
        lap = (np.roll(x, 1, 0) + np.roll(x, -1, 0) + np.roll(x, 1, 1)
               + np.roll(x, -1, 1) - 4.0 * x)
        total += float(np.sum(lap * lap))
    return total
