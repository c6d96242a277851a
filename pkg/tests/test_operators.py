import os

import numpy as np
import pytest
import scipy.sparse as sp

from sgeig.deig import rightmost_pair
from sgeig.errors import (BundleDimensionError, BundleMissingFileError, BundleParseError,
                          BundleSymmetryError, InputError)
from sgeig.gpc import gauss_rule
from sgeig.operators import (AffineOperator, load_bundle, sample_operator, save_bundle, shift_mass,
                             synth_convection_diffusion, synth_random_pencil)
from sgeig.problems import synthetic_problem
from sgeig.randomfield import ViscosityExpansion, node_grid


def const_visc(n, dim, value=1.0):
    pts, _ = node_grid(n, dim)
    return ViscosityExpansion(pts, np.full((1, pts.shape[0]), value), "affine", "legendre", 1)


class TestShiftMass:
    def setup_method(self):
        rng = np.random.default_rng(0)
        G = rng.standard_normal((5, 5))
        self.G = sp.csr_matrix(G @ G.T + 5 * np.eye(5))
        self.B = sp.csr_matrix(rng.standard_normal((2, 5)))

    def test_sigma_zero(self):
        M = shift_mass(self.G, self.B, 0.0).toarray()
        np.testing.assert_array_equal(M[:5, :5], -self.G.toarray())
        assert not M[5:].any() and not M[:, 5:].any()

    def test_symmetric(self):
        M = shift_mass(self.G, self.B, -1e-2)
        assert abs(M - M.T).max() == 0
        np.testing.assert_allclose(M.toarray()[5:, :5], -1e-2 * self.B.toarray())

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            shift_mass(self.G, sp.csr_matrix(np.ones((2, 4))), 0.1)


class TestConvectionDiffusion:
    def test_laplacian_spectrum(self):
        A = synth_convection_diffusion(4, None, const_visc(4, 1), dim=1)
        K = A.terms[0].toarray()
        h = 0.25
        np.testing.assert_allclose(K, np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]]) / h ** 2)
        ev = np.sort(np.linalg.eigvalsh(K))
        ref = np.sort(2 / h ** 2 * (1 - np.cos(np.arange(1, 4) * np.pi / 4)))
        np.testing.assert_allclose(ev, ref, rtol=1e-12)

    def test_symmetric_without_wind(self):
        A, _ = synthetic_problem("affine", n=8, cov=0.1, wind=(0.0, 0.0))
        for K in A.terms:
            assert abs(K - K.T).max() < 1e-12

    def test_term_count(self):
        A, visc = synthetic_problem("lognormal", n=6, cov=0.1)
        assert A.n_nu == visc.n_nu == 28
        A, visc = synthetic_problem("affine", n=6, cov=0.1)
        assert A.n_nu == visc.n_nu == 3

    def test_mass(self):
        A, _ = synthetic_problem("affine", n=6)
        np.testing.assert_array_equal(A.mass.toarray(), -(1 / 6) ** 2 * np.eye(25))

    def test_stable_diffusion(self):
        A, _ = synthetic_problem("affine", n=8, cov=0.0, wind=(0.0, 0.0))
        pair = rightmost_pair(A.terms[0], A.mass)
        assert pair.lam.imag == 0 and pair.lam.real < 0

    def test_nonpositive_mean(self):
        with pytest.raises(InputError):
            synth_convection_diffusion(4, None, const_visc(4, 2, -1.0))


class TestSample:
    def test_single_term(self, rng):
        A = AffineOperator([sp.random(6, 6, 0.5, random_state=1)], sp.identity(6), "hermite", 2, 2)
        for _ in range(3):
            assert abs(sample_operator(A, rng.standard_normal(2)) - A.terms[0]).max() == 0

    def test_dense_sum(self, rng):
        A = synth_random_pencil(7, "hermite", 2, 2, n_nu=6)
        xi = rng.standard_normal(2)
        psi = A.psi(xi)
        ref = sum(c * K.toarray() for c, K in zip(psi, A.terms))
        assert np.abs(sample_operator(A, xi).toarray() - ref).max() < 1e-13

    def test_linear_in_terms(self, rng):
        A = synth_random_pencil(5, "legendre", 1, 1, n_nu=2)
        B = AffineOperator([A.terms[0], 2.5 * A.terms[1]], A.mass, "legendre", 1, 1)
        xi = rng.uniform(-1, 1, 1)
        diff = (sample_operator(B, xi) - sample_operator(A, xi)).toarray()
        np.testing.assert_allclose(diff, 1.5 * A.psi(xi)[1] * A.terms[1].toarray(), atol=1e-14)

    def test_mean_is_first_term(self):
        A = synth_random_pencil(6, "hermite", 2, 2, n_nu=10)
        rule = gauss_rule("hermite", 4, 2)
        E = sum(w * sample_operator(A, x).toarray() for x, w in zip(rule.points, rule.weights))
        assert np.abs(E - A.terms[0].toarray()).max() < 1e-10

    def test_wrong_dimension(self):
        A = synth_random_pencil(4, "hermite", 2, 2)
        with pytest.raises(InputError):
            sample_operator(A, [0.0])


class TestBundle:
    def test_round_trip(self, tmp_path):
        A, _ = synthetic_problem("lognormal", n=5, cov=0.1)
        save_bundle(A, tmp_path)
        B = load_bundle(tmp_path)
        assert (B.family, B.m_xi, B.p, B.n_nu) == (A.family, A.m_xi, A.p, A.n_nu)
        for K, L in zip(A.terms + [A.mass], B.terms + [B.mass]):
            assert (K != L).nnz == 0

    def test_single_term(self, tmp_path):
        A = AffineOperator([sp.identity(3)], -sp.identity(3), "legendre", 1, 0)
        save_bundle(A, tmp_path)
        assert load_bundle(tmp_path).n_nu == 1

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(BundleMissingFileError):
            load_bundle(tmp_path)

    def test_missing_matrix(self, tmp_path):
        save_bundle(synth_random_pencil(4), tmp_path)
        os.remove(tmp_path / "K_002.mtx")
        with pytest.raises(BundleMissingFileError):
            load_bundle(tmp_path)

    def test_corrupt_header(self, tmp_path):
        save_bundle(synth_random_pencil(4), tmp_path)
        (tmp_path / "K_001.mtx").write_text("garbage\n1 2 3\n")
        with pytest.raises(BundleParseError, match="K_001.mtx"):
            load_bundle(tmp_path)

    def test_dimension_mismatch(self, tmp_path):
        save_bundle(synth_random_pencil(4), tmp_path)
        import scipy.io as sio
        sio.mmwrite(tmp_path / "K_002.mtx", sp.identity(5))
        with pytest.raises(BundleDimensionError):
            load_bundle(tmp_path)

    def test_nonsymmetric_mass(self, tmp_path):
        save_bundle(synth_random_pencil(4), tmp_path)
        import scipy.io as sio
        sio.mmwrite(tmp_path / "M.mtx", sp.csr_matrix(np.triu(np.ones((4, 4)))))
        with pytest.raises(BundleSymmetryError):
            load_bundle(tmp_path)

    def test_distinct_exit_codes(self):
        codes = {e.exit_code for e in (BundleMissingFileError, BundleParseError, BundleDimensionError,
                                       BundleSymmetryError)}
        assert len(codes) == 4
