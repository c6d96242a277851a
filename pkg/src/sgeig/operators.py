"""Affine operator expansions ``K(xi) = sum_l K_l psi_l(xi)``.

Also provides the shifted mass matrix, a finite-difference
convection-diffusion generator driven by a random viscosity, a random
pencil generator with a prescribed rightmost eigenvalue, and Matrix Market
bundle input/output.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .errors import (BundleDimensionError, BundleMissingFileError, BundleParseError,
                     BundleSymmetryError, InputError)
from .gpc import FAMILIES, evaluate_indices, graded_indices

MANIFEST = "manifest.txt"
MASS_SYM_TOL = 1e-12


@dataclass(eq=False)
class AffineOperator:
    """Terms ``K_l`` (sparse, n_x by n_x), mass matrix and basis metadata.

    ``terms[l]`` multiplies the ``l``-th function of the graded orthonormal
    basis in ``m_xi`` variables of ``family``.  ``p`` is the degree of the
    solution expansion the operator is meant to be paired with.
    """

    terms: list
    mass: sp.spmatrix
    family: str
    m_xi: int
    p: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.terms:
            raise InputError("an operator needs at least one term")
        self.terms = [sp.csr_matrix(K, dtype=float) for K in self.terms]
        self.mass = sp.csr_matrix(self.mass, dtype=float)
        n = self.terms[0].shape[0]
        for K in self.terms + [self.mass]:
            if K.shape != (n, n):
                raise InputError("all terms and the mass matrix must be square of equal size")
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}")
        asym = abs(self.mass - self.mass.T)
        if asym.nnz and asym.max() > MASS_SYM_TOL:
            raise InputError("mass matrix must be symmetric")

    @property
    def n_x(self):
        return self.terms[0].shape[0]

    @property
    def n_nu(self):
        return len(self.terms)

    @property
    def term_indices(self):
        return graded_indices(self.m_xi, self.n_nu)

    def psi(self, xi):
        """Values of the expansion functions at ``xi``."""
        xi = np.asarray(xi, dtype=float).reshape(1, -1)
        if xi.shape[1] != self.m_xi:
            raise InputError(f"xi has {xi.shape[1]} components, operator expects {self.m_xi}")
        return evaluate_indices(self.family, self.term_indices, xi)[0]

    def sample(self, xi):
        return sample_operator(self, xi)


def sample_operator(A, xi):
    """``K(xi) = sum_l K_l psi_l(xi)`` as a CSR matrix."""
    w = A.psi(xi)
    out = A.terms[0] * w[0]
    for K, c in zip(A.terms[1:], w[1:]):
        out = out + K * c
    return sp.csr_matrix(out)


def shift_mass(G, B, sigma):
    """Shifted mass matrix ``[[-G, sigma B^T], [sigma B, 0]]``."""
    G = sp.csr_matrix(G)
    B = sp.csr_matrix(B)
    if G.shape[0] != G.shape[1] or B.shape[1] != G.shape[0]:
        raise InputError(f"inconsistent shapes G {G.shape}, B {B.shape}")
    n_p = B.shape[0]
    return sp.bmat([[-G, sigma * B.T], [sigma * B, sp.csr_matrix((n_p, n_p))]], format="csr")


def _wind_values(wind, points):
    N = points.shape[0]
    if wind is None:
        return np.zeros((N, 2))
    if callable(wind):
        w = np.asarray(wind(points), dtype=float)
        return np.broadcast_to(w, (N, 2)).copy()
    w = np.asarray(wind, dtype=float).reshape(-1)
    if w.size == 1:
        w = np.array([w[0], 0.0])
    return np.tile(w[:2], (N, 1))


def _face_pairs(n, dim):
    """Node pairs ``(a, b, axis)`` joined by a grid edge, with x fastest."""
    side = n + 1
    ids = np.arange(side ** dim).reshape((side,) * dim)
    pairs = []
    if dim == 1:
        pairs.append((ids[:-1], ids[1:], 0))
    else:
        # ids[iy, ix]
        pairs.append((ids[:, :-1].ravel(), ids[:, 1:].ravel(), 0))
        pairs.append((ids[:-1, :].ravel(), ids[1:, :].ravel(), 1))
    return pairs


def _interior(n, dim):
    side = n + 1
    ids = np.arange(side ** dim).reshape((side,) * dim)
    inner = ids[(slice(1, -1),) * dim]
    return inner.ravel()


def diffusion_stencil(n, coeff, dim=2):
    """Five-point (three-point in 1D) stencil of ``-div(c grad u)`` on interior nodes.

    ``coeff`` holds nodal values on the full grid; face values are the
    mean of the two adjacent nodes.  Dirichlet nodes are eliminated.
    """
    h = 1.0 / n
    N = (n + 1) ** dim
    rows, cols, vals = [], [], []
    for a, b, _ in _face_pairs(n, dim):
        cf = 0.5 * (coeff[a] + coeff[b]) / h ** 2
        rows += [a, b, a, b]
        cols += [a, b, b, a]
        vals += [cf, cf, -cf, -cf]
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    inner = _interior(n, dim)
    return K[inner][:, inner]


def convection_stencil(n, wind, points, dim=2):
    """Central-difference ``w . grad u`` on interior nodes."""
    h = 1.0 / n
    N = (n + 1) ** dim
    w = _wind_values(wind, points)
    rows, cols, vals = [], [], []
    for a, b, axis in _face_pairs(n, dim):
        # row a gets +w_a u_b / 2h, row b gets -w_b u_a / 2h
        rows += [a, b]
        cols += [b, a]
        vals += [w[a, axis] / (2 * h), -w[b, axis] / (2 * h)]
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    inner = _interior(n, dim)
    return C[inner][:, inner]


def synth_convection_diffusion(n, wind, visc, dim=2, p=3):
    """Convection-diffusion operator with random viscosity.

    Parameters
    ----------
    n : int
        Intervals per side of the unit square (or unit interval); the
        interior holds ``(n - 1)**dim`` unknowns.
    wind : None, scalar, pair, or callable(points) -> (N, 2)
        Deterministic wind; it enters only the mean term.
    visc : ViscosityExpansion
        Viscosity coefficients at the ``(n + 1)**dim`` grid nodes.
    dim : {1, 2}
    p : int
        Degree of the solution expansion recorded with the operator.

    Returns
    -------
    AffineOperator
        ``K_l`` is the diffusion stencil with coefficient ``nu_l``; the mass
        matrix is ``-h**2 I``.
    """
    if n < 3:
        raise InputError("grid needs n >= 3")
    if visc.points.shape[0] != (n + 1) ** dim:
        raise InputError(f"viscosity given at {visc.points.shape[0]} nodes, grid has {(n + 1) ** dim}")
    coeffs = visc.gpc_coeffs()
    if np.any(coeffs[0] <= 0):
        raise InputError("mean viscosity must be positive")
    terms = [diffusion_stencil(n, c, dim) for c in coeffs]
    terms[0] = (terms[0] + convection_stencil(n, wind, visc.points, dim)).tocsr()
    h = 1.0 / n
    M = -h ** 2 * sp.identity(terms[0].shape[0], format="csr")
    info = {"generator": "convection_diffusion", "n": n, "dim": dim, "kind": visc.kind}
    return AffineOperator(terms, M, visc.family, visc.m_xi, p, info)


def synth_random_pencil(n_x, family="legendre", m_xi=2, p=3, n_nu=None, rightmost=-1.0 + 2.0j,
                        cov=0.05, seed=0):
    """Random nonsymmetric operator with a prescribed mean rightmost eigenvalue.

    The mean term is ``-S D S^-1`` with ``D`` block diagonal: a 2 by 2
    scaled rotation block for a complex ``rightmost`` (or a scalar for a real one)
    and real eigenvalues well to its left.  The mass matrix is ``-I`` so the
    mean pencil has eigenvalues ``eig(D)``.  Higher terms are dense random
    matrices scaled by ``cov`` and decaying with polynomial degree.
    """
    rng = np.random.default_rng(seed)
    rightmost = complex(rightmost)
    n_nu = n_nu if n_nu is not None else m_xi + 1
    D = np.zeros((n_x, n_x))
    start = 0
    if rightmost.imag != 0:
        a, b = rightmost.real, abs(rightmost.imag)
        # anisotropic block: its eigenvector (2, i) has v^T v far from zero, which keeps the
        # per-part normalization well conditioned
        D[:2, :2] = [[a, 2.0 * b], [-0.5 * b, a]]
        start = 2
    else:
        D[0, 0] = rightmost.real
        start = 1
    scale = abs(rightmost) + 1.0
    D[np.arange(start, n_x), np.arange(start, n_x)] = rightmost.real - scale * (1.0 + 3.0 * rng.random(n_x - start))
    S = np.eye(n_x) + 0.3 * rng.standard_normal((n_x, n_x)) / np.sqrt(n_x)
    K1 = -S @ D @ np.linalg.inv(S)
    terms = [sp.csr_matrix(K1)]
    degrees = graded_indices(m_xi, n_nu).sum(axis=1)
    for l in range(1, n_nu):
        G = rng.standard_normal((n_x, n_x)) / np.sqrt(n_x)
        terms.append(sp.csr_matrix(cov * scale * 0.5 ** (degrees[l] - 1) * G))
    M = -sp.identity(n_x, format="csr")
    info = {"generator": "random_pencil", "seed": seed, "rightmost": str(rightmost)}
    return AffineOperator(terms, M, family, m_xi, p, info)


def save_bundle(A, directory):
    """Write Matrix Market files plus a key=value manifest."""
    os.makedirs(directory, exist_ok=True)
    names = [f"K_{l + 1:03d}.mtx" for l in range(A.n_nu)]
    for name, K in zip(names, A.terms):
        sio.mmwrite(os.path.join(directory, name), K, precision=17, symmetry="general")
    sio.mmwrite(os.path.join(directory, "M.mtx"), A.mass, precision=17)
    lines = [f"n_x={A.n_x}", f"n_nu={A.n_nu}", f"family={A.family}", f"m_xi={A.m_xi}",
             f"p={A.p}", "mass=M.mtx", "terms=" + ",".join(names)]
    with open(os.path.join(directory, MANIFEST), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(directory):
    path = os.path.join(directory, MANIFEST)
    if not os.path.isfile(path):
        raise BundleMissingFileError(f"missing manifest {path}")
    meta = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise BundleParseError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            meta[key.strip()] = val.strip()
    for key in ("n_x", "n_nu", "family", "m_xi", "p", "mass", "terms"):
        if key not in meta:
            raise BundleParseError(f"{path}: missing key {key!r}")
    try:
        for key in ("n_x", "n_nu", "m_xi", "p"):
            meta[key] = int(meta[key])
    except ValueError as exc:
        raise BundleParseError(f"{path}: {exc}") from None
    meta["terms"] = [t.strip() for t in meta["terms"].split(",") if t.strip()]
    return meta


def _read_mtx(path):
    if not os.path.isfile(path):
        raise BundleMissingFileError(f"missing matrix file {path}")
    try:
        return sp.csr_matrix(sio.mmread(path), dtype=float)
    except Exception as exc:
        raise BundleParseError(f"cannot parse {path}: {exc}") from None


def load_bundle(directory):
    """Load an operator written by :func:`save_bundle` or assembled elsewhere."""
    meta = read_manifest(directory)
    if len(meta["terms"]) != meta["n_nu"]:
        raise BundleDimensionError(f"manifest lists {len(meta['terms'])} terms but n_nu={meta['n_nu']}")
    terms = [_read_mtx(os.path.join(directory, t)) for t in meta["terms"]]
    M = _read_mtx(os.path.join(directory, meta["mass"]))
    n = meta["n_x"]
    for name, K in zip(meta["terms"] + [meta["mass"]], terms + [M]):
        if K.shape != (n, n):
            raise BundleDimensionError(f"{name} has shape {K.shape}, expected ({n}, {n})")
    asym = abs(M - M.T)
    if asym.nnz and asym.max() > MASS_SYM_TOL:
        raise BundleSymmetryError(f"{meta['mass']} is not symmetric (max deviation {asym.max():.3e})")
    if meta["family"] not in FAMILIES:
        raise BundleParseError(f"unknown family {meta['family']!r}")
    return AffineOperator(terms, M, meta["family"], meta["m_xi"], meta["p"], {"bundle": directory})
