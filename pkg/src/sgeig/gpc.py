"""Orthonormal polynomial chaos bases, quadrature rules and triple products.

Two families are supported: ``"hermite"`` (orthonormal probabilists' Hermite
polynomials for independent standard normal variables) and ``"legendre"``
(orthonormal Legendre polynomials for independent variables uniform on
(-1, 1)).  Multi-indices are kept in graded order: by total degree, and
within a degree with the exponent of the first variable decreasing, so that
for two variables the degree-one block reads (1, 0), (0, 1).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InputError, SizeError

FAMILIES = ("hermite", "legendre")
DROP_TOL = 1e-12
MERGE_TOL = 1e-12


def _check_family(family):
    fam = str(family).lower()
    if fam not in FAMILIES:
        raise InputError(f"unknown polynomial family {family!r}; expected one of {FAMILIES}")
    return fam


def basis_size(m_xi, p):
    """Number of multi-indices of total degree at most ``p`` in ``m_xi`` variables."""
    if m_xi < 1 or p < 0:
        raise InputError(f"need m_xi >= 1 and p >= 0, got m_xi={m_xi}, p={p}")
    n = comb(m_xi + p, p)
    if n > np.iinfo(np.intp).max:
        raise SizeError(f"basis size C({m_xi}+{p}, {p}) = {n} exceeds the platform index range")
    return n


def _compositions(total, parts):
    """Compositions of ``total`` into ``parts`` nonnegative parts, first part decreasing."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def multi_index_set(m_xi, p):
    """Graded multi-index set of total degree at most ``p``.

    Returns
    -------
    ndarray of int, shape (C(m_xi + p, p), m_xi)
        Zero index first, then degree by degree.
    """
    n = basis_size(m_xi, p)
    out = np.empty((n, m_xi), dtype=np.int64)
    row = 0
    for d in range(p + 1):
        for alpha in _compositions(d, m_xi):
            out[row] = alpha
            row += 1
    return out


def degree_for_count(m_xi, count):
    """Smallest total degree whose graded set holds at least ``count`` indices."""
    if count < 1:
        raise InputError("count must be positive")
    d = 0
    while basis_size(m_xi, d) < count:
        d += 1
    return d


def graded_indices(m_xi, count):
    """First ``count`` multi-indices of the graded order (any prefix, not only full degrees)."""
    return multi_index_set(m_xi, degree_for_count(m_xi, count))[:count]


def univariate(family, n, x):
    """Orthonormal univariate polynomials of degree 0..n at ``x``.

    Returns an array of shape ``x.shape + (n + 1,)``.
    """
    fam = _check_family(family)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n + 1,))
    out[..., 0] = 1.0
    if n == 0:
        return out
    if fam == "hermite":
        out[..., 1] = x
        for k in range(1, n):
            out[..., k + 1] = (x * out[..., k] - np.sqrt(k) * out[..., k - 1]) / np.sqrt(k + 1)
        return out
    # Legendre: run the classical recurrence, then scale by sqrt(2k + 1).
    out[..., 1] = x
    for k in range(1, n):
        out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
    out *= np.sqrt(2.0 * np.arange(n + 1) + 1.0)
    return out


def evaluate_indices(family, indices, points):
    """Evaluate products of univariate polynomials for arbitrary multi-indices.

    Parameters
    ----------
    family : str
    indices : ndarray of int, shape (n, m)
    points : ndarray, shape (N, m)

    Returns
    -------
    ndarray, shape (N, n)
    """
    indices = np.asarray(indices)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != indices.shape[1]:
        raise InputError(f"points have {points.shape[1]} components, basis expects {indices.shape[1]}")
    if not np.all(np.isfinite(points)):
        raise InputError("evaluation points must be finite")
    vals = np.ones((points.shape[0], indices.shape[0]))
    top = int(indices.max(initial=0))
    for d in range(indices.shape[1]):
        table = univariate(family, top, points[:, d])
        vals *= table[:, indices[:, d]]
    return vals


@dataclass(frozen=True, eq=False)
class GpcBasis:
    """Total-degree orthonormal basis.

    Attributes
    ----------
    family : str
        ``"hermite"`` or ``"legendre"``.
    m_xi : int
        Number of random variables.
    p : int
        Total polynomial degree.
    indices : ndarray of int, shape (n_xi, m_xi)
    """

    family: str
    m_xi: int
    p: int
    indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "family", _check_family(self.family))
        idx = multi_index_set(self.m_xi, self.p)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n_xi(self):
        return self.indices.shape[0]

    @property
    def degrees(self):
        return self.indices.sum(axis=1)

    def degree_blocks(self):
        """Index ranges (start, stop) of each total-degree block, computed from ``m_xi``."""
        return [(basis_size(self.m_xi, d - 1) if d > 0 else 0, basis_size(self.m_xi, d))
                for d in range(self.p + 1)]

    def evaluate(self, points):
        """Basis values at each row of ``points``; shape (N, n_xi)."""
        return evaluate_indices(self.family, self.indices, points)

    def same_as(self, other):
        return (self.family, self.m_xi, self.p) == (other.family, other.m_xi, other.p)


def eval_basis(basis, xi):
    """Vector Psi(xi) of length ``n_xi``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != basis.m_xi:
        raise InputError(f"xi has {xi.size} components, basis expects {basis.m_xi}")
    if not np.all(np.isfinite(xi)):
        raise InputError("xi must be finite")
    return basis.evaluate(xi[None, :])[0]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points (N, m) and weights (N,) for a probability measure."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.size:
            raise InputError("points and weights differ in length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise InputError("quadrature points and weights must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.weights.size

    @property
    def m_xi(self):
        return self.points.shape[1]


@lru_cache(maxsize=None)
def _gauss_1d(family, n):
    if n < 1:
        raise InputError("a Gauss rule needs at least one point")
    if family == "hermite":
        x, w = np.polynomial.hermite_e.hermegauss(n)
    else:
        x, w = np.polynomial.legendre.leggauss(n)
    w = w / w.sum()
    x = np.where(np.abs(x) < 1e-15, 0.0, x)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(family, n_points, m_xi):
    """Full tensor Gauss rule for the family's probability law."""
    fam = _check_family(family)
    if m_xi < 1:
        raise InputError("m_xi must be positive")
    x, w = _gauss_1d(fam, int(n_points))
    grids = np.meshgrid(*([x] * m_xi), indexing="ij")
    wgrids = np.meshgrid(*([w] * m_xi), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wts = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    return QuadratureRule(pts, wts)


def smolyak_grid(family, m_xi, level):
    """Isotropic Smolyak sparse grid built from Gauss rules.

    The one-dimensional rule at level ``i`` has ``i`` points.  Grid points
    that coincide within ``MERGE_TOL`` are merged and their weights summed.
    The result is sorted lexicographically by coordinates.
    """
    fam = _check_family(family)
    if level < 1 or m_xi < 1:
        raise InputError("level and m_xi must be positive")
    q = level + m_xi - 1
    acc = {}
    for total in range(max(m_xi, q - m_xi + 1), q + 1):
        coef = (-1) ** (q - total) * comb(m_xi - 1, q - total)
        for levels in _compositions(total - m_xi, m_xi):
            rules = [_gauss_1d(fam, li + 1) for li in levels]
            for combo in product(*[range(len(r[0])) for r in rules]):
                pt = tuple(rules[d][0][c] for d, c in enumerate(combo))
                wt = coef * float(np.prod([rules[d][1][c] for d, c in enumerate(combo)]))
                key = tuple(np.round(np.asarray(pt) / MERGE_TOL).astype(np.int64))
                if key in acc:
                    acc[key][1] += wt
                else:
                    acc[key] = [pt, wt]
    pts = np.array([v[0] for v in acc.values()], dtype=float)
    wts = np.array([v[1] for v in acc.values()], dtype=float)
    order = np.lexsort(pts.T[::-1])
    return QuadratureRule(pts[order], wts[order])


class TripleProductTensor:
    """Sparse collection of slices ``H_l[j, k] = E[psi_l psi_j psi_k]``.

    Entries are kept in coordinate form with zero-based ``l``, ``j``, ``k``.
    """

    def __init__(self, l, j, k, val, n_nu, n_xi):
        self.l = np.asarray(l, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.k = np.asarray(k, dtype=np.int64)
        self.val = np.asarray(val, dtype=float)
        self.n_nu = int(n_nu)
        self.n_xi = int(n_xi)
        for a in (self.l, self.j, self.k, self.val):
            a.setflags(write=False)
        self._slices = None
        self._dense = None

    @property
    def nnz(self):
        return self.val.size

    def slice(self, l):
        """Slice ``l`` (zero-based) as a CSR matrix."""
        if self._slices is None:
            n = self.n_xi
            self._slices = []
            for t in range(self.n_nu):
                sel = self.l == t
                self._slices.append(sp.csr_matrix((self.val[sel], (self.j[sel], self.k[sel])), shape=(n, n)))
        return self._slices[l]

    def dense(self):
        """Dense array of shape (n_nu, n_xi, n_xi)."""
        if self._dense is None:
            d = np.zeros((self.n_nu, self.n_xi, self.n_xi))
            d[self.l, self.j, self.k] = self.val
            d.setflags(write=False)
            self._dense = d
        return self._dense

    def combine(self, coeffs):
        """Dense ``sum_l coeffs[l] H_l`` over ``l < len(coeffs)``."""
        c = np.asarray(coeffs, dtype=float)
        if c.size > self.n_nu:
            raise ConfigurationError(f"{c.size} coefficients for a tensor with {self.n_nu} slices")
        sel = self.l < c.size
        n = self.n_xi
        flat = np.bincount(self.j[sel] * n + self.k[sel], weights=c[self.l[sel]] * self.val[sel],
                           minlength=n * n)
        return flat.reshape(n, n)

    def contract(self, Q):
        """Vector ``[sum_jk Q[j, k] H_l[j, k]]_l`` of length ``n_nu``."""
        Q = np.asarray(Q, dtype=float)
        return np.bincount(self.l, weights=self.val * Q[self.j, self.k], minlength=self.n_nu)

    def truncated(self, n_nu):
        """Tensor restricted to the first ``n_nu`` slices."""
        sel = self.l < n_nu
        return TripleProductTensor(self.l[sel], self.j[sel], self.k[sel], self.val[sel], n_nu, self.n_xi)

    def dump(self, path_or_file):
        """Write one ``l j k value`` line per stored entry (one-based indices)."""
        lines = "".join(f"{a + 1} {b + 1} {c + 1} {v:.17g}\n"
                        for a, b, c, v in zip(self.l, self.j, self.k, self.val))
        if hasattr(path_or_file, "write"):
            path_or_file.write(lines)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(lines)


def _gram_error(family, indices, rule):
    vals = evaluate_indices(family, indices, rule.points)
    gram = vals.T @ (vals * rule.weights[:, None])
    return float(np.max(np.abs(gram - np.eye(indices.shape[0]))))


def _coo_from_dense(h, drop_tol, n_nu, n_xi):
    h = 0.5 * (h + h.transpose(0, 2, 1))
    l, j, k = np.nonzero(np.abs(h) > drop_tol)
    return TripleProductTensor(l, j, k, h[l, j, k], n_nu, n_xi)


def triple_product_tensor(basis, n_nu, rule=None, drop_tol=DROP_TOL):
    """Triple-product tensor for ``n_nu`` expansion terms against ``basis``.

    The ``l`` index runs over the first ``n_nu`` multi-indices of the graded
    order in the same variables, which extends the basis ordering.

    Parameters
    ----------
    basis : GpcBasis
    n_nu : int
        Number of slices.
    rule : QuadratureRule, optional
        Multivariate rule used for the expectations.  By default the
        tensor is assembled from one-dimensional Gauss rules, which is the
        same tensor-product quadrature written in separable form.
    drop_tol : float
        Entries with magnitude at or below this are dropped.
    """
    if n_nu < 1:
        raise InputError("n_nu must be positive")
    ext = graded_indices(basis.m_xi, n_nu)
    n = basis.n_xi
    if rule is not None:
        if rule.m_xi != basis.m_xi:
            raise ConfigurationError("quadrature dimension differs from basis dimension")
        err = max(_gram_error(basis.family, basis.indices, rule),
                  _gram_error(basis.family, ext, rule))
        if err > 1e-10:
            raise ConfigurationError(f"quadrature not exact enough for the basis (Gram error {err:.2e})")
        psi = basis.evaluate(rule.points) * rule.weights[:, None]
        phi = evaluate_indices(basis.family, ext, rule.points)
        basis_vals = basis.evaluate(rule.points)
        h = np.einsum("ql,qj,qk->ljk", phi, psi, basis_vals, optimize=True)
        return _coo_from_dense(h, drop_tol, n_nu, n)
    a_max = int(ext.max(initial=0))
    b_max = basis.p
    e = univariate_triples(basis.family, a_max, b_max)
    h = np.ones((n_nu, n, n))
    for d in range(basis.m_xi):
        h *= e[ext[:, d][:, None, None], basis.indices[:, d][None, :, None],
               basis.indices[:, d][None, None, :]]
    return _coo_from_dense(h, drop_tol, n_nu, n)


def univariate_triples(family, a_max, b_max):
    """Table ``e[a, b, c] = E[psi_a psi_b psi_c]`` for a <= a_max, b, c <= b_max.

    Computed with a Gauss rule exact for the full degree a_max + 2 b_max.
    """
    fam = _check_family(family)
    n_pts = (a_max + 2 * b_max) // 2 + 1
    x, w = _gauss_1d(fam, n_pts)
    top = max(a_max, b_max)
    t = univariate(fam, top, x)
    e = np.einsum("q,qa,qb,qc->abc", w, t[:, :a_max + 1], t[:, :b_max + 1], t[:, :b_max + 1])
    e = 0.5 * (e + e.transpose(0, 2, 1))
    e[np.abs(e) <= DROP_TOL] = 0.0
    return e
