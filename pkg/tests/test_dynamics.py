import math

import numpy as np
import pytest

from embodykit.dynamics import (
    ChainState,
    KinematicChain,
    Link,
    Site,
    bias_forces,
    chain_from_body_spec,
    forward_kinematics,
    inverse_dynamics,
    jacobian,
    kinetic_energy,
    mass_matrix,
    primitive_inertia,
    site_pose,
    step,
)
from embodykit.errors import InvalidInputError
from embodykit.growth import (
    BodyPart,
    BodySpec,
    GeomPrimitive,
    build_body_spec,
    load_body_template,
)
from embodykit.paths import default_curves, default_template_path


def planar_two_link(m1=1.2, m2=0.7, l1=0.5, l2=0.4, lc1=0.25, lc2=0.2,
                    I1=0.02, I2=0.011, g=9.81):
    """Planar elbow chain in the x-y plane, gravity along -y."""
    links = [
        Link(parent=-1, axis=(0, 0, 1), offset_pos=(0, 0, 0), mass=m1,
             inertia=np.diag([1e-3, 1e-3, I1]), com=(lc1, 0, 0),
             joint_range=(-10, 10), name="shoulder"),
        Link(parent=0, axis=(0, 0, 1), offset_pos=(l1, 0, 0), mass=m2,
             inertia=np.diag([1e-3, 1e-3, I2]), com=(lc2, 0, 0),
             joint_range=(-10, 10), name="elbow"),
    ]
    sites = {"tip": Site(link=1, pos=(l2, 0, 0)), "base": Site(link=-1)}
    return KinematicChain(links=links, sites=sites, gravity=(0.0, -g, 0.0))


def two_link_oracle(chain, q, qdot):
    """Textbook Lagrangian mass matrix and bias for the planar elbow chain."""
    m1, m2 = chain.links[0].mass, chain.links[1].mass
    I1 = chain.links[0].inertia[2, 2]
    I2 = chain.links[1].inertia[2, 2]
    lc1 = chain.links[0].com[0]
    lc2 = chain.links[1].com[0]
    l1 = chain.links[1].offset_pos[0]
    g = -chain.gravity[1]
    q1, q2 = q
    d1, d2 = qdot
    c2, s2 = math.cos(q2), math.sin(q2)
    M = np.array([
        [I1 + I2 + m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2),
         I2 + m2 * (lc2**2 + l1 * lc2 * c2)],
        [I2 + m2 * (lc2**2 + l1 * lc2 * c2), I2 + m2 * lc2**2],
    ])
    h = np.array([
        -m2 * l1 * lc2 * s2 * (2 * d1 * d2 + d2**2)
        + (m1 * lc1 + m2 * l1) * g * math.cos(q1)
        + m2 * lc2 * g * math.cos(q1 + q2),
        m2 * l1 * lc2 * s2 * d1**2 + m2 * lc2 * g * math.cos(q1 + q2),
    ])
    return M, h


def numeric_jacobian(chain, q, site, h=1e-6):
    """Central finite differences of forward kinematics."""
    n = chain.n
    J = np.zeros((6, n))
    for j in range(n):
        qp, qm = q.copy(), q.copy()
        qp[j] += h
        qm[j] -= h
        pp = site_pose(chain, qp, site)
        pm = site_pose(chain, qm, site)
        J[:3, j] = (pp.position - pm.position) / (2 * h)
        dR = (pp.rotation - pm.rotation) / (2 * h)
        W = dR @ site_pose(chain, q, site).rotation.T
        J[3:, j] = np.array([W[2, 1], W[0, 2], W[1, 0]])
    return J


@pytest.fixture(scope="module")
def body_chain():
    template = load_body_template(default_template_path())
    spec = build_body_spec(template, 18.0, default_curves())
    return chain_from_body_spec(spec, "torso")


class TestForwardKinematics:
    def test_rest_pose_is_chained_offsets(self):
        chain = planar_two_link()
        pose = site_pose(chain, np.zeros(2), "tip")
        np.testing.assert_allclose(pose.position, [0.9, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-12)

    def test_planar_closed_form(self):
        chain = planar_two_link()
        q = np.array([0.7, -0.4])
        l1, l2 = 0.5, 0.4
        pose = site_pose(chain, q, "tip")
        expected = [l1 * math.cos(q[0]) + l2 * math.cos(q[0] + q[1]),
                    l1 * math.sin(q[0]) + l2 * math.sin(q[0] + q[1]), 0.0]
        np.testing.assert_allclose(pose.position, expected, atol=1e-12)

    def test_rotations_orthonormal(self, body_chain):
        rng = np.random.default_rng(1)
        for _ in range(5):
            q = rng.uniform(-1, 1, body_chain.n)
            for pose in forward_kinematics(body_chain, q).values():
                R = pose.rotation
                np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
                assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)

    def test_dimension_mismatch(self):
        chain = planar_two_link()
        with pytest.raises(InvalidInputError):
            forward_kinematics(chain, np.zeros(3))


class TestJacobian:
    def test_root_site_all_zero(self):
        chain = planar_two_link()
        assert np.all(jacobian(chain, np.zeros(2), "base") == 0)

    def test_planar_analytic(self):
        chain = planar_two_link()
        q = np.array([0.3, 0.9])
        l1, l2 = 0.5, 0.4
        J = jacobian(chain, q, "tip")
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        s12, c12 = math.sin(q.sum()), math.cos(q.sum())
        expected = np.array([
            [-l1 * s1 - l2 * s12, -l2 * s12],
            [l1 * c1 + l2 * c12, l2 * c12],
        ])
        np.testing.assert_allclose(J[:2], expected, atol=1e-12)

    def test_matches_finite_differences(self, body_chain):
        rng = np.random.default_rng(4)
        for _ in range(3):
            q = rng.uniform(-0.8, 0.8, body_chain.n)
            for site in ("right_hand", "head", "left_foot"):
                J = jacobian(body_chain, q, site)
                Jn = numeric_jacobian(body_chain, q, site)
                assert np.linalg.norm(J - Jn) <= 1e-6 * max(1.0, np.linalg.norm(J))

    def test_unknown_site(self):
        with pytest.raises(InvalidInputError):
            jacobian(planar_two_link(), np.zeros(2), "nope")


class TestMassMatrix:
    def test_single_pendulum_parallel_axis(self):
        m, d, Ic = 0.8, 0.3, 0.004
        chain = KinematicChain(
            links=[Link(parent=-1, axis=(0, 1, 0), offset_pos=(0, 0, 0), mass=m,
                        inertia=np.diag([Ic, Ic, Ic]), com=(0, 0, -d),
                        joint_range=(-10, 10))],
            sites={},
        )
        M = mass_matrix(chain, np.zeros(1))
        assert M[0, 0] == pytest.approx(Ic + m * d * d, rel=1e-12)

    def test_symmetry(self, body_chain):
        rng = np.random.default_rng(9)
        for _ in range(5):
            q = rng.uniform(-1, 1, body_chain.n)
            M = mass_matrix(body_chain, q)
            np.testing.assert_allclose(M, M.T, atol=1e-12)

    def test_positive_definite(self, body_chain):
        rng = np.random.default_rng(10)
        for _ in range(100):
            q = rng.uniform(-1, 1, body_chain.n)
            assert np.linalg.eigvalsh(mass_matrix(body_chain, q)).min() > 0

    def test_columns_match_rnea(self, body_chain):
        rng = np.random.default_rng(12)
        q = rng.uniform(-1, 1, body_chain.n)
        M = mass_matrix(body_chain, q)
        grav_free = KinematicChain(links=body_chain.links, sites=body_chain.sites,
                                   gravity=(0, 0, 0))
        for j in range(body_chain.n):
            e = np.zeros(body_chain.n)
            e[j] = 1.0
            col = inverse_dynamics(grav_free, q, np.zeros(body_chain.n), e,
                                   use_gravity=False)
            np.testing.assert_allclose(M[:, j], col, atol=1e-10)

    def test_lagrangian_oracle(self):
        chain = planar_two_link()
        rng = np.random.default_rng(21)
        for _ in range(10):
            q = rng.uniform(-2, 2, 2)
            qd = rng.uniform(-3, 3, 2)
            Mo, ho = two_link_oracle(chain, q, qd)
            np.testing.assert_allclose(mass_matrix(chain, q), Mo, atol=1e-9)
            np.testing.assert_allclose(bias_forces(chain, q, qd), ho, atol=1e-9)


class TestBiasForces:
    def test_zero_without_motion_or_gravity(self):
        chain = planar_two_link()
        grav_free = KinematicChain(links=chain.links, sites=chain.sites,
                                   gravity=(0, 0, 0))
        np.testing.assert_allclose(
            bias_forces(grav_free, np.array([0.4, 1.0]), np.zeros(2)), 0.0,
            atol=1e-12)

    def test_horizontal_pendulum_statics(self):
        m, d = 0.8, 0.3
        chain = KinematicChain(
            links=[Link(parent=-1, axis=(0, 1, 0), offset_pos=(0, 0, 0), mass=m,
                        inertia=np.zeros((3, 3)), com=(d, 0, 0),
                        joint_range=(-10, 10))],
            sites={},
        )
        h = bias_forces(chain, np.zeros(1), np.zeros(1))
        assert h[0] == pytest.approx(-m * 9.81 * d, rel=1e-12)


class TestStep:
    def test_rest_stays_at_rest(self):
        chain = planar_two_link()
        grav_free = KinematicChain(links=chain.links, sites=chain.sites,
                                   gravity=(0, 0, 0))
        s0 = ChainState(np.array([0.2, -0.1]), np.zeros(2))
        s1 = step(grav_free, s0, np.zeros(2), dt=0.005)
        np.testing.assert_array_equal(s1.q, s0.q)
        np.testing.assert_array_equal(s1.qdot, s0.qdot)

    def test_pendulum_period(self):
        m, d, Ic, g = 0.8, 0.3, 0.004, 9.81
        chain = KinematicChain(
            links=[Link(parent=-1, axis=(0, 1, 0), offset_pos=(0, 0, 0), mass=m,
                        inertia=np.diag([Ic, Ic, Ic]), com=(0, 0, -d),
                        joint_range=(-10, 10))],
            sites={},
        )
        I_joint = Ic + m * d * d
        expected = 2 * math.pi * math.sqrt(I_joint / (m * g * d))
        dt = 1e-4
        state = ChainState(np.array([0.02]), np.zeros(1))
        crossings = []
        prev = state.q[0]
        for k in range(int(3 * expected / dt)):
            state = step(chain, state, np.zeros(1), dt=dt)
            if prev < 0 <= state.q[0]:
                crossings.append(k * dt)
            prev = state.q[0]
        assert len(crossings) >= 2
        period = crossings[-1] - crossings[0]
        period /= len(crossings) - 1
        assert period == pytest.approx(expected, rel=0.01)

    def test_limit_clamp_sticks(self):
        chain = planar_two_link()
        links = [Link(parent=l.parent, axis=l.axis, offset_pos=l.offset_pos,
                      mass=l.mass, inertia=l.inertia, com=l.com,
                      joint_range=(-0.5, 0.5), name=l.name)
                 for l in chain.links]
        chain = KinematicChain(links=links, sites=chain.sites, gravity=(0, 0, 0))
        state = ChainState(np.array([0.499, 0.0]), np.zeros(2))
        for _ in range(50):
            state = step(chain, state, np.array([5.0, 0.0]), dt=0.005)
        assert state.q[0] == 0.5
        assert state.qdot[0] == 0.0

    def test_energy_conservation(self, body_chain):
        grav_free = KinematicChain(links=body_chain.links, sites=body_chain.sites,
                                   gravity=(0, 0, 0))
        rng = np.random.default_rng(30)
        ranges = body_chain.joint_ranges
        mid = ranges.mean(axis=1)
        span = ranges[:, 1] - ranges[:, 0]
        # stay well inside the joint ranges: limit clamping would dissipate
        q0 = mid + rng.uniform(-0.1, 0.1, body_chain.n) * span
        state = ChainState(q0, rng.uniform(-0.3, 0.3, body_chain.n))
        e0 = kinetic_energy(grav_free, state)
        tau = np.zeros(body_chain.n)
        for _ in range(1000):
            state = step(grav_free, state, tau, dt=1e-4)
        e1 = kinetic_energy(grav_free, state)
        assert abs(e1 - e0) / e0 < 1e-3

    def test_determinism(self, body_chain):
        rng = np.random.default_rng(33)
        s = ChainState(rng.uniform(-0.2, 0.2, body_chain.n),
                       rng.uniform(-0.2, 0.2, body_chain.n))
        tau = rng.uniform(-0.5, 0.5, body_chain.n)
        a = step(body_chain, s, tau)
        b = step(body_chain, s, tau)
        assert np.array_equal(a.q, b.q) and np.array_equal(a.qdot, b.qdot)


class TestChainFromBodySpec:
    def test_parallel_axis_fold_in(self):
        # massless jointed arm carrying a rigid sphere at distance L
        m, r, L = 0.5, 0.1, 0.4
        blob = BodyPart("blob", GeomPrimitive("sphere", (r,)), (0, 0, -L), m)
        arm = BodyPart("arm", GeomPrimitive("sphere", (0.01,)), (0, 0, 0), 1e-9,
                       joints=(growth_joint((0, 1, 0), -3, 3, 1.0),),
                       children=(blob,))
        root = BodyPart("base", GeomPrimitive("sphere", (0.05,)), (0, 0, 0), 1.0,
                        children=(arm,))
        spec = BodySpec(root=root, age=18.0)
        chain = chain_from_body_spec(spec, "base")
        assert chain.n == 1
        M = mass_matrix(chain, np.zeros(1))
        expected = 0.4 * m * r * r + m * L * L
        assert M[0, 0] == pytest.approx(expected, rel=1e-6)

    def test_zero_joint_subtree(self):
        blob = BodyPart("blob", GeomPrimitive("sphere", (0.1,)), (0, 0, -0.2), 0.5)
        root = BodyPart("base", GeomPrimitive("sphere", (0.05,)), (0, 0, 0), 1.0,
                        children=(blob,))
        chain = chain_from_body_spec(BodySpec(root=root, age=18.0), "base")
        assert chain.n == 0
        assert mass_matrix(chain, np.zeros(0)).shape == (0, 0)
        assert bias_forces(chain, np.zeros(0), np.zeros(0)).shape == (0,)
        s = step(chain, ChainState.zeros(0), np.zeros(0))
        assert s.q.shape == (0,)

    def test_topology_preserved_across_ages(self):
        template = load_body_template(default_template_path())
        curves = default_curves()
        c6 = chain_from_body_spec(build_body_spec(template, 6.0, curves), "torso")
        c18 = chain_from_body_spec(build_body_spec(template, 18.0, curves), "torso")
        assert c6.joint_names() == c18.joint_names()
        assert [l.parent for l in c6.links] == [l.parent for l in c18.links]
        assert any(a.mass != b.mass for a, b in zip(c6.links, c18.links))

    def test_unknown_root(self):
        template = load_body_template(default_template_path())
        with pytest.raises(InvalidInputError):
            chain_from_body_spec(template, "tail")


def growth_joint(axis, lo, hi, gear):
    from embodykit.growth import Joint

    return Joint(tuple(float(x) for x in axis), (float(lo), float(hi)), float(gear))


def test_capsule_inertia_degenerates_to_sphere():
    m = 2.0
    cap = primitive_inertia(GeomPrimitive("capsule", (0.1, 0.0)), m)
    # zero-length capsule: hemisphere pair at d = 3r/8 about the center
    r = 0.1
    m_h = m / 2
    ixx = 2 * ((83.0 / 320.0) * m_h * r * r + m_h * (3 * r / 8) ** 2)
    assert cap[2, 2] == pytest.approx(0.4 * m * r * r, rel=1e-12)
    assert cap[0, 0] == pytest.approx(ixx, rel=1e-12)
    assert cap[0, 0] == pytest.approx(0.4 * m * r * r, rel=1e-12)
