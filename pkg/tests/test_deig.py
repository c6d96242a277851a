import numpy as np
import pytest

from sgeig.deig import EigenPair, align_eigvec, rightmost, rightmost_pair, solve_generalized
from sgeig.errors import PencilError


def test_diagonal():
    (p,) = solve_generalized(np.diag([1.0, 2.0, 3.0]), np.eye(3), 1)
    assert p.lam == pytest.approx(3.0)
    np.testing.assert_allclose(np.abs(p.v), [0, 0, 1], atol=1e-15)


def test_rotation():
    pairs = solve_generalized(np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(2), 2)
    lams = sorted((p.lam for p in pairs), key=lambda z: z.imag)
    np.testing.assert_allclose(lams, [-1j, 1j], atol=1e-14)


def test_random_residual(rng):
    K = rng.standard_normal((8, 8))
    M = rng.standard_normal((8, 8)) + 4 * np.eye(8)
    for p in solve_generalized(K, M, 8):
        assert p.residual(K, M) < 1e-10
        assert abs(np.linalg.norm(p.v) - 1) < 1e-14


def test_sorted_and_conjugates(rng):
    K = rng.standard_normal((10, 10))
    pairs = solve_generalized(K, np.eye(10), 10)
    re = [p.lam.real for p in pairs]
    assert re == sorted(re, reverse=True)
    for p in pairs:
        if p.lam.imag != 0:
            vc = np.conj(p.v)
            assert np.linalg.norm(K @ vc - np.conj(p.lam) * vc) < 1e-10


def test_infinite_filtered():
    K = np.diag([1.0, 2.0, 3.0])
    M = np.diag([1.0, 1.0, 0.0])
    lams = [p.lam for p in solve_generalized(K, M, 3)]
    assert len(lams) == 2
    np.testing.assert_allclose(sorted(np.real(lams)), [1.0, 2.0])


def test_singular_pencil():
    with pytest.raises(PencilError):
        solve_generalized(np.eye(2), np.zeros((2, 2)), 1)


def test_rightmost_rules():
    v = np.ones(1, dtype=complex)
    assert rightmost([EigenPair(-1.0, v), EigenPair(-2.0, v)]).lam == -1.0
    a, b = 0.3, 1.2
    assert rightmost([EigenPair(a - b * 1j, v), EigenPair(a + b * 1j, v)]).lam == a + b * 1j
    spectrum = [EigenPair(z, v) for z in (-1.0, 0.0085 - 2.2551j, -0.5 + 1j, 0.0085 + 2.2551j)]
    assert rightmost(spectrum).lam == 0.0085 + 2.2551j


def test_rightmost_pair_complex():
    K = np.array([[-1.0, 2.0, 0], [-2.0, -1.0, 0], [0, 0, -3.0]])
    assert rightmost_pair(K, np.eye(3)).lam == pytest.approx(-1 + 2j)


class TestAlign:
    def test_identity(self, rng):
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        v /= np.linalg.norm(v)
        np.testing.assert_allclose(align_eigvec(v, v), v, atol=1e-15)

    def test_phase_removed(self, rng):
        ref = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        ref /= np.linalg.norm(ref)
        out = align_eigvec(np.exp(1j * np.pi / 4) * ref, ref)
        assert np.abs(out - ref).max() < 1e-14

    def test_stationary(self, rng):
        ref = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        ref /= np.linalg.norm(ref)
        v /= np.linalg.norm(v)
        out = align_eigvec(v, ref)
        assert abs(np.vdot(ref, out).imag) < 1e-12
        assert abs(np.linalg.norm(out) - 1) < 1e-14

    def test_orthogonal_warns(self):
        v = np.array([1.0, 0.0], dtype=complex)
        with pytest.warns(RuntimeWarning):
            out = align_eigvec(v, np.array([0.0, 1.0], dtype=complex))
        assert np.array_equal(out, v)
