"""Dense generalized nonsymmetric eigensolver and eigenvector phase alignment."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import InputError, IterationError, PencilError

INFINITE_TOL = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue ``lam`` and unit 2-norm eigenvector ``v``."""

    lam: complex
    v: np.ndarray

    def residual(self, K, M):
        K = K.toarray() if sp.issparse(K) else np.asarray(K)
        M = M.toarray() if sp.issparse(M) else np.asarray(M)
        return float(np.linalg.norm(K @ self.v - self.lam * (M @ self.v)))


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def solve_generalized(K, M, k=1):
    """The ``k`` finite eigenpairs of ``K v = lam M v`` with largest real part.

    Uses the QZ algorithm in homogeneous form; eigenvalues with
    ``|beta| <= 1e-12 max|beta|`` are treated as infinite and discarded.
    Pairs are sorted by descending real part (stable sort).
    """
    K = _dense(K)
    M = _dense(M)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape != M.shape:
        raise InputError(f"need square matrices of equal size, got {K.shape} and {M.shape}")
    try:
        (alpha, beta), V = sla.eig(K, M, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IterationError(f"dense eigensolver failed: {exc}") from None
    bmax = np.max(np.abs(beta)) if beta.size else 0.0
    finite = np.abs(beta) > INFINITE_TOL * bmax
    if bmax == 0 or not np.any(finite):
        raise PencilError("pencil has no finite eigenvalues")
    lam = alpha[finite] / beta[finite]
    V = V[:, finite]
    order = np.argsort(-lam.real, kind="stable")
    out = []
    for i in order[:k]:
        v = V[:, i].astype(complex)
        out.append(EigenPair(complex(lam[i]), v / np.linalg.norm(v)))
    return out


def rightmost(pairs):
    """Pair with the largest real part; ties prefer Im >= 0, then smaller |Im|."""
    pairs = list(pairs)
    if not pairs:
        raise InputError("no eigenpairs given")
    re = np.array([p.lam.real for p in pairs])
    top = re.max()
    tol = TIE_TOL * max(1.0, abs(top))
    cand = [p for p in pairs if p.lam.real >= top - tol]
    cand.sort(key=lambda p: (p.lam.imag < 0, abs(p.lam.imag), -p.lam.real))
    return cand[0]


def rightmost_pair(K, M, n_candidates=6):
    """Rightmost eigenpair of the pencil."""
    return rightmost(solve_generalized(K, M, n_candidates))


def align_eigvec(v, ref):
    """Return ``exp(i theta) v`` maximizing ``Re <ref, exp(i theta) v>``."""
    v = np.asarray(v, dtype=complex)
    ref = np.asarray(ref, dtype=complex)
    c = np.vdot(ref, v)
    if abs(c) == 0.0:
        warnings.warn("alignment undefined: eigenvector orthogonal to reference", RuntimeWarning, stacklevel=2)
        return v
    return v * (np.conj(c) / abs(c))
