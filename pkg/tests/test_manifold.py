import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from livo import manifold
from livo.errors import InvalidArgumentError


def random_rotvecs(rng, n, max_angle=np.pi - 1e-3):
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, max_angle, size=n)
    return axes * angles[:, None]


class TestSo3Exp:
    def test_zero_angle_is_identity(self):
        assert np.allclose(manifold.so3_exp(np.zeros(3)), np.eye(3))

    def test_half_turn_about_x(self):
        r = manifold.so3_exp(np.array([np.pi, 0.0, 0.0]))
        assert np.allclose(r, np.diag([1.0, -1.0, -1.0]), atol=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(0)
        vecs = random_rotvecs(rng, 200)
        ours = manifold.so3_exp(vecs)
        ref = Rotation.from_rotvec(vecs).as_matrix()
        assert np.max(np.abs(ours - ref)) < 1e-12

    def test_output_is_rotation(self):
        rng = np.random.default_rng(1)
        vecs = random_rotvecs(rng, 500, max_angle=3 * np.pi)
        mats = manifold.so3_exp(vecs)
        err = np.swapaxes(mats, -2, -1) @ mats - np.eye(3)
        assert np.max(np.abs(err)) < 1e-9
        assert np.allclose(np.linalg.det(mats), 1.0, atol=1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            manifold.so3_exp(np.array([np.nan, 0.0, 0.0]))

    def test_small_angle_branch(self):
        v = np.array([1e-10, -2e-10, 5e-11])
        r = manifold.so3_exp(v)
        assert np.allclose(manifold.so3_log(r), v, atol=1e-18)


class TestSo3Log:
    def test_identity(self):
        assert np.allclose(manifold.so3_log(np.eye(3)), np.zeros(3))

    def test_half_turn_axis_sign(self):
        # Angle-pi axis sign convention: first nonzero component positive.
        r = manifold.so3_log(np.diag([1.0, -1.0, -1.0]))
        assert np.allclose(r, [np.pi, 0.0, 0.0], atol=1e-9)
        r = manifold.so3_log(np.diag([-1.0, 1.0, -1.0]))
        assert np.allclose(r, [0.0, np.pi, 0.0], atol=1e-9)

    def test_non_orthonormal_rejected(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-3
        with pytest.raises(InvalidArgumentError):
            manifold.so3_log(bad)

    def test_exp_log_roundtrip_random(self):
        rng = np.random.default_rng(2)
        vecs = random_rotvecs(rng, 1000)
        back = manifold.so3_log(manifold.so3_exp(vecs))
        assert np.max(np.abs(back - vecs)) < 1e-9

    def test_log_exp_roundtrip_random_rotations(self):
        rng = np.random.default_rng(3)
        mats = Rotation.random(1000, rng=rng).as_matrix()
        back = manifold.so3_exp(manifold.so3_log(mats))
        assert np.max(np.abs(back - mats)) < 1e-9

    def test_near_pi_branch(self):
        rng = np.random.default_rng(4)
        axes = rng.normal(size=(100, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        for eps in (0.0, 1e-9, 1e-7):
            vecs = axes * (np.pi - eps)
            mats = manifold.so3_exp(vecs)
            back = manifold.so3_exp(manifold.so3_log(mats))
            assert np.max(np.abs(back - mats)) < 1e-7

    def test_angle_canonical_range(self):
        rng = np.random.default_rng(5)
        vecs = random_rotvecs(rng, 200, max_angle=3 * np.pi)
        logs = manifold.so3_log(manifold.so3_exp(vecs))
        angles = np.linalg.norm(logs, axis=1)
        assert np.all(angles <= np.pi + 1e-12)


class TestBoxOps:
    def test_boxplus_zero_is_identity(self):
        rng = np.random.default_rng(6)
        rot = Rotation.random(rng=rng).as_matrix()
        a = rng.normal(size=5)
        rot2, a2 = manifold.boxplus((rot, a), (np.zeros(3), np.zeros(5)))
        assert np.allclose(rot2, rot)
        assert np.allclose(a2, a)

    def test_boxplus_from_identity(self):
        r = np.array([0.1, -0.2, 0.3])
        b = np.array([1.0, 2.0])
        rot, a = manifold.boxplus((np.eye(3), np.zeros(2)), (r, b))
        assert np.allclose(rot, manifold.so3_exp(r))
        assert np.allclose(a, b)

    def test_boxminus_self_is_zero(self):
        rng = np.random.default_rng(7)
        rot = Rotation.random(rng=rng).as_matrix()
        a = rng.normal(size=4)
        r, b = manifold.boxminus((rot, a), (rot, a))
        assert np.allclose(r, 0.0, atol=1e-12)
        assert np.allclose(b, 0.0)

    def test_boxminus_from_identity(self):
        r = np.array([0.5, 0.1, -0.4])
        b = np.array([3.0])
        rr, bb = manifold.boxminus((manifold.so3_exp(r), b), (np.eye(3), np.zeros(1)))
        assert np.allclose(rr, r, atol=1e-9)
        assert np.allclose(bb, b)

    def test_inverse_property_random(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            rot = Rotation.random(rng=rng).as_matrix()
            a = rng.normal(size=6)
            delta = (random_rotvecs(rng, 1)[0], rng.normal(size=6))
            y = manifold.boxplus((rot, a), delta)
            back = manifold.boxminus(y, (rot, a))
            assert np.allclose(back[0], delta[0], atol=1e-9)
            assert np.allclose(back[1], delta[1], atol=1e-12)

    def test_boxplus_boxminus_recovers_state(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            x1 = (Rotation.random(rng=rng).as_matrix(), rng.normal(size=3))
            x2 = (Rotation.random(rng=rng).as_matrix(), rng.normal(size=3))
            d = manifold.boxminus(x1, x2)
            back = manifold.boxplus(x2, d)
            assert np.allclose(back[0], x1[0], atol=1e-9)
            assert np.allclose(back[1], x1[1], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            manifold.boxplus((np.eye(3), np.zeros(3)), (np.zeros(3), np.zeros(4)))
        with pytest.raises(InvalidArgumentError):
            manifold.boxminus((np.eye(3), np.zeros(3)), (np.eye(3), np.zeros(2)))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3),
    st.lists(st.floats(-100.0, 100.0), min_size=2, max_size=2),
)
def test_property_boxminus_boxplus_identity(rotvec, euclid):
    rotvec = np.asarray(rotvec)
    angle = np.linalg.norm(rotvec)
    if angle >= np.pi - 1e-6:
        rotvec = rotvec / angle * (np.pi - 1e-3)
    base = (manifold.so3_exp(np.array([0.3, -0.5, 0.7])), np.array([1.0, -2.0]))
    delta = (rotvec, np.asarray(euclid))
    back = manifold.boxminus(manifold.boxplus(base, delta), base)
    assert np.allclose(back[0], delta[0], atol=1e-9)
    assert np.allclose(back[1], delta[1], atol=1e-9)


class TestRightJacobian:
    def test_matches_finite_difference(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            r = random_rotvecs(rng, 1, max_angle=2.5)[0]
            jr = manifold.so3_right_jacobian(r)
            fd = np.zeros((3, 3))
            h = 1e-7
            for j in range(3):
                dp = np.zeros(3)
                dp[j] = h
                # exp(r + dp) = exp(r) exp(Jr dp)  =>  column j of Jr.
                lhs = manifold.so3_log(
                    manifold.so3_exp(r).T @ manifold.so3_exp(r + dp)
                )
                fd[:, j] = lhs / h
            assert np.max(np.abs(jr - fd)) < 1e-6

    def test_inverse_consistency(self):
        rng = np.random.default_rng(11)
        vecs = random_rotvecs(rng, 100, max_angle=3.0)
        jr = manifold.so3_right_jacobian(vecs)
        jr_inv = manifold.so3_right_jacobian_inv(vecs)
        prod = jr @ jr_inv
        assert np.max(np.abs(prod - np.eye(3))) < 1e-9

    def test_small_angle(self):
        jr = manifold.so3_right_jacobian(np.zeros(3))
        assert np.allclose(jr, np.eye(3))
        jr_inv = manifold.so3_right_jacobian_inv(np.array([1e-10, 0, 0]))
        assert np.allclose(jr_inv, np.eye(3), atol=1e-9)
