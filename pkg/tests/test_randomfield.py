import numpy as np
import pytest

from sgeig.errors import InputError, NumericalError
from sgeig.gpc import GpcBasis, basis_size, gauss_rule
from sgeig.randomfield import (CovarianceKernel, affine_viscosity, covariance, discrete_kl,
                               lognormal_coeffs, lognormal_viscosity, node_grid, read_field_csv)


class TestCovariance:
    def test_diagonal(self):
        k = CovarianceKernel(1.7, 0.3, 0.2)
        assert covariance(k, (0.4, 0.1), (0.4, 0.1)) == pytest.approx(1.7 ** 2)

    def test_symmetric(self, rng):
        k = CovarianceKernel(1.0, 0.25, 0.5)
        for _ in range(20):
            a, b = rng.random(2), rng.random(2)
            assert covariance(k, a, b) == covariance(k, b, a)

    def test_value(self):
        assert covariance(CovarianceKernel(1, 1, 1), (0, 0), (1, 0)) == pytest.approx(np.exp(-1), abs=1e-15)

    def test_bad_params(self):
        with pytest.raises(InputError):
            CovarianceKernel(1.0, 0.0, 1.0)


class TestDiscreteKL:
    def test_single_point(self):
        w = 0.3
        kl = discrete_kl(CovarianceKernel(2.0), np.array([[0.5, 0.5]]), np.array([w]), 1)
        # the weighted operator is the scalar w * sigma^2
        assert kl.eigenvalues[0] == pytest.approx(w * 4.0)
        assert kl.modes[0, 0] == pytest.approx(1 / np.sqrt(w))

    def test_single_point_unit_weight(self):
        kl = discrete_kl(CovarianceKernel(2.0), np.array([[0.5, 0.5]]), np.array([1.0]), 1)
        assert kl.eigenvalues[0] == pytest.approx(4.0)
        assert kl.modes[0, 0] == pytest.approx(1.0)

    def test_trace_identity(self):
        pts, w = node_grid(8)
        k = CovarianceKernel(1.3, 0.25, 0.125)
        kl = discrete_kl(k, pts, w, len(w))
        assert abs(kl.eigenvalues.sum() - np.sum(w * 1.3 ** 2)) < 1e-8

    def test_orthonormal_modes(self):
        pts, w = node_grid(10)
        kl = discrete_kl(CovarianceKernel(), pts, w, 6)
        G = kl.modes.T @ (kl.modes * w[:, None])
        assert np.abs(G - np.eye(6)).max() < 1e-10
        assert np.all(np.diff(kl.eigenvalues) <= 0) and kl.eigenvalues.min() >= 0

    def test_sign_convention(self):
        pts, w = node_grid(6)
        kl = discrete_kl(CovarianceKernel(), pts, w, 4)
        for l in range(4):
            v = kl.modes[:, l]
            assert v[np.argmax(np.abs(v))] > 0

    def test_too_many_modes(self):
        pts, w = node_grid(2)
        with pytest.raises(InputError):
            discrete_kl(CovarianceKernel(), pts, w, 100)

    def test_indefinite_detected(self):
        class Bad(CovarianceKernel):
            def matrix(self, points):
                return np.diag([1.0, -1.0, 0.5])
        pts, w = node_grid(2, dim=1)
        with pytest.raises(NumericalError):
            discrete_kl(Bad(), pts, w, 1)


class TestLognormal:
    def test_zero_fluctuation(self):
        b = GpcBasis("hermite", 2, 3)
        g0 = np.array([0.2, -0.4])
        e = lognormal_coeffs(g0, np.zeros((2, 2)), b, 28)
        np.testing.assert_allclose(e.coeffs[0], np.exp(g0), rtol=1e-14)
        assert np.abs(e.coeffs[1:]).max() < 1e-14

    @pytest.mark.parametrize("convention", ["projection", "literal"])
    def test_mean_identity(self, convention, rng):
        b = GpcBasis("hermite", 2, 3)
        g = 0.3 * rng.standard_normal((2, 5))
        e = lognormal_coeffs(0.1, g, b, 28, convention)
        rule = gauss_rule("hermite", 8, 2)
        vals = np.array([e.evaluate(x) for x in rule.points])
        mean = rule.weights @ vals
        assert np.abs(mean - e.coeffs[0]).max() < 1e-10

    def test_projection_matches_law(self, rng):
        b = GpcBasis("hermite", 2, 3)
        g = np.array([[0.3], [0.2]])
        g0 = -0.1
        e = lognormal_coeffs(g0, g, b, 28)
        xi = rng.standard_normal((10 ** 6, 2))
        s = np.exp(g0 + xi @ g[:, 0])
        se = s.std() / np.sqrt(s.size)
        assert abs(s.mean() - e.coeffs[0, 0]) < 3 * se

    def test_partial_sums_converge(self):
        g = np.array([[0.5], [0.4]])
        rule = gauss_rule("hermite", 14, 2)
        exact = np.exp(rule.points @ g[:, 0])
        errs = []
        for p in range(0, 6):
            n_nu = basis_size(2, p)
            e = lognormal_coeffs(0.0, g, GpcBasis("hermite", 2, 1), n_nu)
            approx = np.array([e.evaluate(x)[0] for x in rule.points])
            errs.append(np.sqrt(rule.weights @ (approx - exact) ** 2))
        assert np.all(np.diff(errs) < 0)

    def test_cov_zero_single_term(self):
        pts, w = node_grid(4)
        kl = discrete_kl(CovarianceKernel(), pts, w, 2)
        e = lognormal_viscosity(0.1, 0.0, kl, GpcBasis("hermite", 2, 3), 28)
        assert e.n_nu == 1 and np.all(e.coeffs[0] == 0.1)

    def test_requires_hermite(self):
        with pytest.raises(InputError):
            lognormal_coeffs(0.0, np.zeros((2, 1)), GpcBasis("legendre", 2, 2), 6)


class TestAffine:
    def setup_method(self):
        pts, w = node_grid(6)
        self.kl = discrete_kl(CovarianceKernel(1.0, 0.125, 0.25), pts, w, 2)

    def test_cov_zero(self):
        e = affine_viscosity(0.1, 0.0, self.kl)
        assert e.n_nu == 1 and np.all(e.coeffs == 0.1)

    def test_structure(self):
        e = affine_viscosity(0.1, 0.1, self.kl)
        assert e.n_nu == 3 and np.all(e.coeffs[0] == 0.1)

    def test_variance_identity(self):
        e = affine_viscosity(0.1, 0.1, self.kl)
        rule = gauss_rule("legendre", 3, 2)
        vals = np.array([e.evaluate(x) for x in rule.points])
        mean = rule.weights @ vals
        var = rule.weights @ (vals - mean) ** 2
        ref = 0.01 ** 2 * np.sum(self.kl.eigenvalues[None, :] * self.kl.modes ** 2, axis=1)
        assert np.abs(var - ref).max() < 1e-10

    def test_flat_mode(self):
        pts = np.zeros((3, 2))
        pts[:, 0] = [0.0, 0.5, 1.0]
        from sgeig.randomfield import DiscreteKL
        c = 0.7
        kl = DiscreteKL(pts, np.ones(3) / 3, np.array([0.4]), np.full((3, 1), c))
        e = affine_viscosity(1.0, 0.2, kl)
        np.testing.assert_allclose(e.coeffs[1], 0.2 * np.sqrt(3 * 0.4) * c, rtol=1e-15)

    def test_linear_in_xi(self):
        e = affine_viscosity(0.1, 0.1, self.kl)
        b = GpcBasis("legendre", 2, 2)
        rule = gauss_rule("legendre", 3, 2)
        vals = np.array([e.evaluate(x) for x in rule.points])
        proj = (b.evaluate(rule.points) * rule.weights[:, None]).T @ vals
        assert np.abs(proj[3:]).max() < 1e-12

    def test_positivity_warning(self):
        with pytest.warns(RuntimeWarning):
            e = affine_viscosity(0.1, 0.99, self.kl)
        assert e.warnings

    def test_csv_round_trip(self, tmp_path):
        e = affine_viscosity(0.1, 0.1, self.kl)
        e.to_csv(tmp_path / "f.csv")
        pts, cols = read_field_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(pts, e.points)
        np.testing.assert_array_equal(cols, e.gpc_coeffs())
