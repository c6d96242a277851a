"""Random viscosity fields.

A separable exponential covariance kernel is discretized on a grid
(Nystrom method with quadrature weights) to obtain a truncated
Karhunen-Loeve expansion.  Two viscosity models are built from it:

* lognormal: ``nu(x, xi) = exp(g0(x) + sum_j g_j(x) xi_j)`` with standard
  normal ``xi``, expanded in orthonormal Hermite polynomials;
* affine: ``nu(x, xi) = nu1 + sigma_nu sum_l sqrt(3 lambda_l) v_l(x) xi_l``
  with ``xi_l`` uniform on (-1, 1).
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NumericalError
from .gpc import _gauss_1d, graded_indices, univariate


@dataclass(frozen=True)
class CovarianceKernel:
    """``C(X1, X2) = sigma_g**2 exp(-|x2 - x1| / L_x - |y2 - y1| / L_y)``."""

    sigma_g: float = 1.0
    L_x: float = 0.25
    L_y: float = 0.25

    def __post_init__(self):
        if not (self.sigma_g > 0 and self.L_x > 0 and self.L_y > 0):
            raise InputError("kernel parameters must be positive")

    def __call__(self, X1, X2):
        X1 = _as_xy(X1)
        X2 = _as_xy(X2)
        dx = np.abs(X2[..., 0] - X1[..., 0])
        dy = np.abs(X2[..., 1] - X1[..., 1])
        return self.sigma_g ** 2 * np.exp(-dx / self.L_x - dy / self.L_y)

    def matrix(self, points):
        P = _as_xy(points)
        return self(P[:, None, :], P[None, :, :])


def covariance(kernel, X1, X2):
    """Kernel value for a pair of points."""
    return float(kernel(X1, X2))


def _as_xy(X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] == 1:
        X = np.concatenate([X, np.zeros_like(X)], axis=-1)
    if not np.all(np.isfinite(X)):
        raise InputError("points must be finite")
    return X


def node_grid(n, dim=2, extent=1.0):
    """Nodes of a uniform grid with ``n`` intervals per side and trapezoid weights.

    Returns ``(points, weights)`` with points of shape ((n+1)**dim, 2); in
    one dimension the second coordinate is zero.  Nodes are ordered with the
    first coordinate varying fastest.
    """
    if n < 1 or dim not in (1, 2):
        raise InputError("need n >= 1 and dim in (1, 2)")
    x = np.linspace(0.0, extent, n + 1)
    w1 = np.full(n + 1, extent / n)
    w1[[0, -1]] *= 0.5
    if dim == 1:
        return np.stack([x, np.zeros_like(x)], axis=1), w1
    X, Y = np.meshgrid(x, x, indexing="xy")
    W = np.outer(w1, w1)
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


@dataclass(frozen=True, eq=False)
class DiscreteKL:
    """Leading eigenpairs of the weighted covariance operator on a grid.

    ``modes[:, l]`` holds ``v_l`` at the grid points, orthonormal in the
    inner product ``<u, v>_w = sum_i w_i u_i v_i``.
    """

    points: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray

    @property
    def m_xi(self):
        return self.eigenvalues.size


def discrete_kl(kernel, points, weights, m_xi):
    """Nystrom discretization of the covariance eigenproblem.

    Solves ``W^(1/2) C W^(1/2) u = lambda u`` and returns ``v = W^(-1/2) u``
    with the entry of largest magnitude made positive.
    """
    P = _as_xy(points)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if P.shape[0] == 0 or P.shape[0] != w.size:
        raise InputError("grid must be nonempty with one weight per point")
    if np.any(w <= 0):
        raise InputError("quadrature weights must be positive")
    if not 1 <= m_xi <= w.size:
        raise InputError(f"m_xi must be in 1..{w.size}")
    sw = np.sqrt(w)
    S = sw[:, None] * kernel.matrix(P) * sw[None, :]
    lam, U = sla.eigh(S)
    lam = lam[::-1]
    U = U[:, ::-1]
    if lam[-1] < -1e-10 * lam[0]:
        raise NumericalError(f"covariance matrix is indefinite (eigenvalue {lam[-1]:.3e})")
    lam = lam[:m_xi]
    V = U[:, :m_xi] / sw[:, None]
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(m_xi)])
    return DiscreteKL(P, w, np.maximum(lam, 0.0), V)


@dataclass(eq=False)
class ViscosityExpansion:
    """Viscosity coefficients on a grid.

    ``coeffs[l]`` is the field multiplying the ``l``-th expansion function:
    ``psi_l(xi)`` for the lognormal kind and ``xi_l`` (with ``coeffs[0]``
    the constant) for the affine kind.  :meth:`gpc_coeffs` always returns
    coefficients with respect to the orthonormal basis.
    """

    points: np.ndarray
    coeffs: np.ndarray
    kind: str
    family: str
    m_xi: int
    warnings: list = field(default_factory=list)

    @property
    def n_nu(self):
        return self.coeffs.shape[0]

    def gpc_coeffs(self):
        if self.kind == "affine":
            c = self.coeffs.copy()
            c[1:] /= np.sqrt(3.0)
            return c
        return self.coeffs.copy()

    def evaluate(self, xi):
        """Viscosity at every grid point for the parameter ``xi``."""
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size != self.m_xi:
            raise InputError("xi dimension mismatch")
        idx = graded_indices(self.m_xi, self.n_nu)
        psi = np.ones(self.n_nu)
        top = int(idx.max(initial=0))
        for d in range(self.m_xi):
            psi *= univariate(self.family, top, xi[d])[idx[:, d]]
        return psi @ self.gpc_coeffs()

    def mean(self):
        return self.coeffs[0].copy()

    def to_csv(self, path):
        """Columns ``x, y, nu_1, ..., nu_n`` (orthonormal-basis coefficients)."""
        c = self.gpc_coeffs()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y"] + [f"nu_{l + 1}" for l in range(self.n_nu)])
            for i, (x, y) in enumerate(self.points):
                wr.writerow([repr(float(x)), repr(float(y))] + [repr(float(v)) for v in c[:, i]])


def read_field_csv(path):
    """Read a CSV written by :meth:`ViscosityExpansion.to_csv`; returns (points, columns)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2], data[:, 2:].T


def lognormal_coeffs(g0, g, basis, n_nu, convention="projection", points=None):
    """Hermite expansion coefficients of ``exp(g0 + sum_j g_j xi_j)``.

    Parameters
    ----------
    g0 : float or ndarray (N,)
    g : ndarray (m_xi, N)
        Gaussian-field mode amplitudes at the grid points.
    basis : GpcBasis
        Hermite basis fixing ``m_xi``.
    n_nu : int
        Number of expansion terms (graded order).
    convention : {"projection", "literal"}
        ``"projection"`` gives the L2 projection
        ``exp(g0 + |g|^2/2) E[psi_l(xi + g)]``.  ``"literal"`` evaluates
        ``exp(g0 + |g|^2/2) E[psi_l(xi - g)] / E[psi_l(xi - g)^2]``.
    points : ndarray (N, 2), optional
        Grid coordinates stored with the result.

    Returns
    -------
    ViscosityExpansion
    """
    if basis.family != "hermite":
        raise InputError("lognormal coefficients require a Hermite basis")
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if g.shape[0] != basis.m_xi:
        raise InputError(f"need {basis.m_xi} Gaussian modes, got {g.shape[0]}")
    g0 = np.broadcast_to(np.asarray(g0, dtype=float), g.shape[1:])
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(g0))):
        raise InputError("fields must be finite")
    if convention not in ("projection", "literal"):
        raise InputError(f"unknown convention {convention!r}")
    sign = 1.0 if convention == "projection" else -1.0
    idx = graded_indices(basis.m_xi, n_nu)
    top = int(idx.max(initial=0))
    x, w = _gauss_1d("hermite", top + 2)
    coef = np.ones((n_nu, g.shape[1]))
    for d in range(basis.m_xi):
        vals = univariate("hermite", top, x[None, :] + sign * g[d][:, None])
        num = np.einsum("q,iqa->ia", w, vals)
        if convention == "literal":
            den = np.einsum("q,iqa->ia", w, vals ** 2)
        else:
            den = np.einsum("q,qa->a", w, univariate("hermite", top, x) ** 2)[None, :]
        coef *= (num / den)[:, idx[:, d]].T
    coef *= np.exp(g0 + 0.5 * np.sum(g ** 2, axis=0))[None, :]
    if points is None:
        points = np.zeros((g.shape[1], 2))
    return ViscosityExpansion(np.asarray(points, dtype=float), coef, "lognormal", "hermite", basis.m_xi)


def lognormal_viscosity(nu1, cov, kl, basis, n_nu, convention="projection"):
    """Lognormal viscosity with mean about ``nu1`` and coefficient of variation ``cov``.

    ``kl`` must come from a unit-variance kernel.  The underlying Gaussian
    field has standard deviation ``sigma_g = sqrt(log(1 + cov**2))`` and
    mean ``log(nu1) - sigma_g**2 / 2``.
    """
    if nu1 <= 0 or cov < 0:
        raise InputError("need nu1 > 0 and cov >= 0")
    N = kl.points.shape[0]
    if cov == 0:
        return ViscosityExpansion(kl.points, np.full((1, N), float(nu1)), "lognormal", "hermite", basis.m_xi)
    if kl.m_xi != basis.m_xi:
        raise InputError("KL truncation differs from basis dimension")
    sigma_g = np.sqrt(np.log1p(cov ** 2))
    g0 = np.log(nu1) - 0.5 * sigma_g ** 2
    g = sigma_g * np.sqrt(kl.eigenvalues)[:, None] * kl.modes.T
    return lognormal_coeffs(g0, g, basis, n_nu, convention, points=kl.points)


def affine_viscosity(nu1, cov, kl):
    """Affine viscosity ``nu1 + cov nu1 sum_l sqrt(3 lambda_l) v_l(x) xi_l``.

    ``kl`` must come from a unit-variance kernel.  A warning is issued and
    recorded if the expansion can reach non-positive values on the grid.
    """
    if nu1 <= 0 or not 0 <= cov < 1:
        raise InputError("need nu1 > 0 and 0 <= cov < 1")
    N = kl.points.shape[0]
    if cov == 0:
        return ViscosityExpansion(kl.points, np.full((1, N), float(nu1)), "affine", "legendre", kl.m_xi)
    sigma = cov * nu1
    c = np.empty((kl.m_xi + 1, N))
    c[0] = nu1
    c[1:] = sigma * np.sqrt(3.0 * kl.eigenvalues)[:, None] * kl.modes.T
    out = ViscosityExpansion(kl.points, c, "affine", "legendre", kl.m_xi)
    floor = np.min(nu1 - np.sum(np.abs(c[1:]), axis=0))
    if floor <= 0:
        msg = f"affine viscosity may become non-positive (worst-case minimum {floor:.3e})"
        out.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out
