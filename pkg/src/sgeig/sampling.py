"""Monte Carlo and stochastic collocation drivers, gPC projection and density estimates."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .deig import align_eigvec, rightmost_pair
from .errors import DegenerateDataError, InputError, SamplingError, SgeigError
from .gpc import GpcBasis


@dataclass(eq=False)
class SampleSet:
    """Sampled rightmost eigenpairs.

    ``failed[q]`` marks samples whose eigensolve failed; their ``lam`` is
    NaN and they are excluded from estimates.
    """

    points: np.ndarray
    weights: np.ndarray
    lam: np.ndarray
    failed: np.ndarray
    method: str
    seed: int = None
    vectors: np.ndarray = None

    @property
    def size(self):
        return self.weights.size

    @property
    def n_failed(self):
        return int(np.sum(self.failed))

    def valid(self):
        """Points, renormalized weights, eigenvalues (and vectors) of unflagged samples."""
        ok = ~self.failed
        w = self.weights[ok]
        if self.method == "mc":
            w = np.full(w.size, 1.0 / max(w.size, 1))
        vec = None if self.vectors is None else self.vectors[ok]
        return self.points[ok], w, self.lam[ok], vec

    def to_csv(self, path):
        """Columns ``xi_1..xi_m, re, im``; failed samples carry NaN."""
        m = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"xi_{d + 1}" for d in range(m)] + ["re", "im"])
            for x, l in zip(self.points, self.lam):
                wr.writerow([f"{v:.17g}" for v in x] + [f"{l.real:.17g}", f"{l.imag:.17g}"])


@dataclass(eq=False)
class GpcCoefficients:
    """gPC coefficients of the eigenvalue (and optionally eigenvector)."""

    lam: np.ndarray
    basis: GpcBasis
    method: str
    V: np.ndarray = None

    @classmethod
    def from_state(cls, state, basis):
        return cls(state.lam.copy(), basis, "sg", state.V.copy())

    def to_csv(self, path):
        """Columns ``k, degree, re, im`` with one-based ``k``."""
        deg = self.basis.degrees
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "degree", "re", "im"])
            for k, l in enumerate(self.lam):
                wr.writerow([k + 1, int(deg[k]), f"{l.real:.17g}", f"{l.imag:.17g}"])


def read_coefficients_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 2] + 1j * data[:, 3], data[:, 1].astype(int)


def draw_points(family, m_xi, n, seed):
    """``n`` draws from the basis law; row ``q`` comes from the stream ``(seed, q)``."""
    pts = np.empty((n, m_xi))
    for q in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(q,)))
        pts[q] = rng.standard_normal(m_xi) if family == "hermite" else rng.uniform(-1.0, 1.0, m_xi)
    return pts


def _solve_points(A, points, threads, keep_vectors):
    ref = rightmost_pair(A.terms[0], A.mass).v

    def one(xi):
        try:
            pair = rightmost_pair(A.sample(xi), A.mass)
        except (SgeigError, np.linalg.LinAlgError, ValueError):
            return np.nan + 1j * np.nan, None, True
        v = align_eigvec(pair.v, ref) if keep_vectors else None
        return pair.lam, v, False

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, points))
    else:
        out = [one(xi) for xi in points]
    lam = np.array([o[0] for o in out], dtype=complex)
    failed = np.array([o[2] for o in out], dtype=bool)
    vectors = None
    if keep_vectors:
        vectors = np.full((len(out), A.n_x), np.nan + 0j)
        for q, o in enumerate(out):
            if o[1] is not None:
                vectors[q] = o[1]
    return lam, failed, vectors


def new_seed():
    """Fresh random seed (recorded by callers for reproducibility)."""
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def run_mc(A, n_samples, seed=None, threads=1, keep_vectors=False):
    """Monte Carlo: rightmost eigenpairs at i.i.d. draws from the basis law.

    Eigenvectors, if kept, are phase-aligned to the mean-problem eigenvector.
    """
    if n_samples < 1:
        raise InputError("n_samples must be positive")
    seed = new_seed() if seed is None else int(seed)
    pts = draw_points(A.family, A.m_xi, n_samples, seed)
    lam, failed, vec = _solve_points(A, pts, threads, keep_vectors)
    return SampleSet(pts, np.full(n_samples, 1.0 / n_samples), lam, failed, "mc", seed, vec)


def run_sc(A, rule, threads=1, keep_vectors=False):
    """Stochastic collocation: rightmost eigenpairs at the quadrature points of ``rule``."""
    if rule.m_xi != A.m_xi:
        raise InputError("quadrature dimension differs from the operator's")
    lam, failed, vec = _solve_points(A, rule.points, threads, keep_vectors)
    if np.any(failed):
        raise SamplingError(f"{int(np.sum(failed))} collocation solves failed")
    return SampleSet(rule.points, rule.weights.copy(), lam, failed, "sc", None, vec)


def project_coefficients(sset, basis):
    """Discrete projection ``lam_k = sum_q w_q lam(xi_q) psi_k(xi_q)`` (and likewise for vectors)."""
    if sset.method == "sc" and np.any(sset.failed):
        raise SamplingError("collocation projection needs every point")
    pts, w, lam, vec = sset.valid()
    if pts.shape[0] == 0:
        raise SamplingError("no valid samples")
    psi = basis.evaluate(pts) * w[:, None]
    coef = psi.T @ lam
    V = None if vec is None else (psi.T @ vec).T
    return GpcCoefficients(coef, basis, sset.method, V)


def sample_gpc(coeffs, points):
    """``sum_k lam_k psi_k(xi)`` at each point."""
    return coeffs.basis.evaluate(points) @ coeffs.lam


def moments(sset):
    """Mean, standard deviation and standard error of the eigenvalue samples (complex)."""
    _, w, lam, _ = sset.valid()
    mean = np.sum(w * lam)
    n = lam.size
    if sset.method == "mc":
        std = np.std(lam.real, ddof=1) + 1j * np.std(lam.imag, ddof=1) if n > 1 else 0j
        se = std / np.sqrt(n)
    else:
        var_re = np.sum(w * (lam.real - mean.real) ** 2)
        var_im = np.sum(w * (lam.imag - mean.imag) ** 2)
        std = np.sqrt(max(var_re, 0)) + 1j * np.sqrt(max(var_im, 0))
        se = 0j
    return {"mean": mean, "std": std, "stderr": se, "n": int(n)}


def silverman_bandwidth(samples):
    """Silverman's rule factor ``(n (d + 2) / 4) ** (-1 / (d + 4))``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float).T)
    d, n = x.shape
    return (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))


def kde(samples, grid, bandwidth=None):
    """Gaussian kernel density estimate on ``grid``.

    Parameters
    ----------
    samples : array (N,) or (N, 2)
    grid : array (G,) or (G, 2)
    bandwidth : float, optional
        Factor multiplying the sample covariance (as in Scott/Silverman
        rules); Silverman's rule when omitted.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2 or not np.all(np.isfinite(x)):
        raise InputError("need at least two finite samples")
    if x.shape[1] not in (1, 2):
        raise InputError("samples must be one or two dimensional")
    cov = np.atleast_2d(np.cov(x.T))
    if np.any(np.diag(cov) == 0) or np.linalg.matrix_rank(cov) < x.shape[1]:
        raise DegenerateDataError("samples have zero variance")
    g = np.asarray(grid, dtype=float)
    g = g[:, None] if g.ndim == 1 else g
    est = gaussian_kde(x.T, bw_method="silverman" if bandwidth is None else bandwidth)
    return np.maximum(est(g.T), 0.0)
