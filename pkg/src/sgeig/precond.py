"""Preconditioners for the Newton linear systems.

All variants act column by column on the matricized residual, treating
each gPC coefficient ``k`` as the unknown block ``(v_Re_k, v_Im_k, lam_Re_k,
lam_Im_k)``:

* ``MB``: block diagonal with the shifted mean operator
  ``A~ = [[K1 - eR muR M, eI muI M], [-eI muI M, K1 - eR muR M]]`` and a 2 by 2
  Schur block ``C~ A~^-1 B~``;
* ``cMB``: the bordered matrix ``[[A~, B~], [C~, 0]]`` built from the mean
  eigenpair (``B~`` and ``C~`` carry the constraint and eigenvalue columns);
* ``cMBu``: ``cMB`` with a low-rank Sherman-Morrison-Woodbury correction that
  tracks the current mean eigenvector;
* ``chGS``: symmetric block Gauss-Seidel over total-degree blocks with ``cMB``
  block solves and coupling terms truncated to the first ``C(m + p_t, p_t)``
  expansion functions.

Real mode drops the imaginary rows and columns.  The real ``MB`` variant
shifts with the identity instead of the mass matrix.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BuildError, ConfigurationError, InputError
from .gpc import basis_size
from .sgcore import join_vector, split_vector

log = logging.getLogger(__name__)

KINDS = ("MB", "cMB", "cMBu", "chGS")
CAPACITANCE_RTOL = 1e-12


@dataclass
class PrecondConfig:
    """Preconditioner choice and parameters.

    ``eps_Re``/``eps_Im`` default to 0.97 for MB and 1 otherwise; ``p_t``
    defaults to the full degree; ``update`` defaults to on for cMBu and chGS.
    ``freeze_coeffs`` keeps the chGS coupling coefficients at their initial
    values instead of refreshing them every Newton step.
    """

    kind: str = "cMB"
    eps_Re: float = None
    eps_Im: float = None
    p_t: int = None
    update: bool = None
    freeze_coeffs: bool = False

    def resolved(self, p):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown preconditioner {self.kind!r}; expected one of {KINDS}")
        default_eps = 0.97 if self.kind == "MB" else 1.0
        eR = default_eps if self.eps_Re is None else float(self.eps_Re)
        eI = default_eps if self.eps_Im is None else float(self.eps_Im)
        if not (0 <= eR <= 1 and 0 <= eI <= 1):
            raise ConfigurationError("shift constants must lie in [0, 1]")
        p_t = p if self.p_t is None else int(self.p_t)
        if not 0 <= p_t <= p:
            raise ConfigurationError(f"truncation degree must lie in 0..{p}")
        update = self.kind in ("cMBu", "chGS") if self.update is None else bool(self.update)
        if update and self.kind == "MB":
            raise ConfigurationError("the MB preconditioner has no update")
        if self.kind == "cMBu":
            update = True
        return PrecondConfig(self.kind, eR, eI, p_t, update, self.freeze_coeffs)


def shifted_mean(K1, M, muR, muI, eR, eI, mode):
    """``A~``: the mean operator shifted by the scaled mean eigenvalue."""
    D = (K1 - eR * muR * M).tocsr()
    if mode == "real":
        return D
    S = (eI * muI * M).tocsr()
    return sp.bmat([[D, S], [-S, D]], format="csr")


def border_blocks(M, wR, wI, mode):
    """``B~`` (columns for the eigenvalue unknowns) and ``C~`` (constraint rows)."""
    if mode == "real":
        return (-(M @ wR))[:, None], -wR[None, :]
    B = np.block([[-(M @ wR)[:, None], (M @ wI)[:, None]],
                  [-(M @ wI)[:, None], -(M @ wR)[:, None]]])
    z = np.zeros_like(wR)
    C = np.block([[-wR[None, :], z[None, :]], [z[None, :], -wI[None, :]]])
    return B, C


def cmb_matrix(K1, M, muR, muI, wR, wI, eR=1.0, eI=1.0, mode="complex"):
    """Bordered constraint matrix ``[[A~, B~], [C~, 0]]`` (sparse CSC)."""
    At = shifted_mean(K1, M, muR, muI, eR, eI, mode)
    B, C = border_blocks(M, wR, wI, mode)
    r = B.shape[1]
    return sp.bmat([[At, sp.csr_matrix(B)], [sp.csr_matrix(C), sp.csr_matrix((r, r))]], format="csc")


def _factor(A, what):
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise BuildError(f"{what} is singular ({exc}); try adjusting the shift constants") from None
    return lu


class Preconditioner:
    """Common interface: ``apply`` on stacked vectors, ``apply_blocks`` on matricized blocks."""

    def __init__(self, problem, state0, cfg):
        self.problem = problem
        self.cfg = cfg
        self.mode = state0.mode
        self.n_x = problem.n_x
        self.n_xi = problem.n_xi
        self.M = problem.M
        self.K1 = problem.terms[0]
        self.wR0 = state0.V_Re[:, 0].copy()
        self.wI0 = state0.V_Im[:, 0].copy() if self.mode == "complex" else np.zeros(self.n_x)
        self.muR = float(state0.lam_Re[0])
        self.muI = float(state0.lam_Im[0]) if self.mode == "complex" else 0.0
        self.k_mults = 0

    @property
    def width(self):
        return 2 if self.mode == "complex" else 1

    def apply(self, x):
        VR, VI, lR, lI = split_vector(x, self.n_x, self.n_xi, self.mode)
        return join_vector(*self.apply_blocks(VR, VI, lR, lI))

    def apply_blocks(self, VR, VI, lR, lI):
        raise NotImplementedError

    def refresh(self, state):
        """Hook called with the current Newton iterate."""

    def _stack(self, VR, VI, lR, lI):
        if self.mode == "real":
            return np.vstack([VR, np.atleast_2d(lR)])
        return np.vstack([VR, VI, np.atleast_2d(lR), np.atleast_2d(lI)])

    def _unstack(self, Z):
        n = self.n_x
        if self.mode == "real":
            return Z[:n], None, Z[n], None
        return Z[:n], Z[n:2 * n], Z[2 * n], Z[2 * n + 1]


class MeanBased(Preconditioner):
    """Block-diagonal mean-based preconditioner."""

    def __init__(self, problem, state0, cfg):
        super().__init__(problem, state0, cfg)
        if self.mode == "real":
            shift = sp.identity(self.n_x, format="csr")
            self.At = (self.K1 - cfg.eps_Re * self.muR * shift).tocsc()
            self.lu = _factor(self.At, "shifted mean matrix")
            self.S = np.array([[self.wR0 @ self.lu.solve(self.wR0)]])
        else:
            self.At = shifted_mean(self.K1, self.M, self.muR, self.muI, cfg.eps_Re, cfg.eps_Im, "complex").tocsc()
            self.lu = _factor(self.At, "shifted mean matrix")
            B, C = border_blocks(self.M, self.wR0, self.wI0, "complex")
            self.S = C @ self.lu.solve(B)
        if not np.all(np.isfinite(self.S)) or abs(np.linalg.det(self.S)) == 0:
            raise BuildError("Schur block is singular; try adjusting the shift constants")
        self.S_lu = sla.lu_factor(self.S)

    def apply_blocks(self, VR, VI, lR, lI):
        if self.mode == "real":
            XV = self.lu.solve(np.asarray(VR, dtype=float))
            Xl = sla.lu_solve(self.S_lu, np.atleast_2d(lR))
            return XV, None, Xl[0], None
        XV = self.lu.solve(np.vstack([VR, VI]))
        Xl = sla.lu_solve(self.S_lu, np.vstack([lR, lI]))
        n = self.n_x
        return XV[:n], XV[n:], Xl[0], Xl[1]


class ConstraintMeanBased(Preconditioner):
    """Bordered constraint preconditioner with optional SMW update."""

    def __init__(self, problem, state0, cfg):
        super().__init__(problem, state0, cfg)
        self.X = cmb_matrix(self.K1, self.M, self.muR, self.muI, self.wR0, self.wI0,
                            cfg.eps_Re, cfg.eps_Im, self.mode)
        self.lu = _factor(self.X, "constraint preconditioner")
        self.Y = None
        self.Z = None
        self._XinvY = None
        self._cap = None

    # SMW machinery -------------------------------------------------------

    def update_factors(self, wR, wI=None):
        """Explicit factors ``(Y0, Z0)`` with ``Y0 Z0^T`` equal to the update matrix."""
        n = self.n_x
        dR = np.asarray(wR, dtype=float) - self.wR0
        size = self.X.shape[0]
        if self.mode == "real":
            Y0 = np.zeros((size, 2))
            Z0 = np.zeros((size, 2))
            Y0[:n, 0] = -(self.M @ dR)
            Z0[n, 0] = 1.0
            Y0[n, 1] = 1.0
            Z0[:n, 1] = -dR
            return Y0, Z0
        dI = np.asarray(wI, dtype=float) - self.wI0
        MdR = self.M @ dR
        MdI = self.M @ dI
        Y0 = np.zeros((size, 4))
        Z0 = np.zeros((size, 4))
        Y0[:n, 0], Y0[n:2 * n, 0] = -MdR, -MdI
        Z0[2 * n, 0] = 1.0
        Y0[:n, 1], Y0[n:2 * n, 1] = MdI, -MdR
        Z0[2 * n + 1, 1] = 1.0
        Y0[2 * n, 2] = 1.0
        Z0[:n, 2] = -dR
        Y0[2 * n + 1, 3] = 1.0
        Z0[n:2 * n, 3] = -dI
        return Y0, Z0

    def update_matrix(self, wR, wI=None):
        """Sparse update matrix ``M_cMB(w) - M_cMB(w0)``."""
        Y0, Z0 = self.update_factors(wR, wI)
        return sp.csr_matrix(Y0 @ Z0.T)

    def smw_update(self, wR, wI=None):
        """Track the mean-column eigenvector parts ``w`` by a low-rank correction.

        The update matrix is compressed with a thin QR of each factor and an
        SVD of the small core, keeping singular values above a relative
        threshold (at most 4 in complex mode, 2 in real mode).  Returns
        ``True`` if the update was accepted.
        """
        Y0, Z0 = self.update_factors(wR, wI)
        Qy, Ry = np.linalg.qr(Y0)
        Qz, Rz = np.linalg.qr(Z0)
        U, s, Wt = np.linalg.svd(Ry @ Rz.T)
        r = int(np.sum(s > 1e-13 * s[0])) if s[0] > 0 else 0
        if r == 0:
            self.Y = self.Z = self._XinvY = self._cap = None
            return True
        Y = Qy @ (U[:, :r] * s[:r])
        Z = Qz @ Wt[:r].T
        XinvY = self.lu.solve(Y)
        core = Z.T @ XinvY
        cap = np.eye(r) + core
        # singular when I and Z^T X^-1 Y cancel to roundoff level
        ok = np.all(np.isfinite(cap))
        if ok:
            smin = np.linalg.svd(cap, compute_uv=False)[-1]
            ok = smin > CAPACITANCE_RTOL * max(1.0, np.linalg.norm(core, 2))
        if not ok:
            log.warning("SMW capacitance matrix is singular; keeping the base preconditioner")
            self.Y = self.Z = self._XinvY = self._cap = None
            return False
        self.Y, self.Z, self._XinvY = Y, Z, XinvY
        self._cap = sla.lu_factor(cap)
        return True

    @property
    def rank(self):
        return 0 if self.Y is None else self.Y.shape[1]

    def _solve_one(self, b):
        x = self.lu.solve(b)
        if self.Y is not None:
            x = x - self._XinvY @ sla.lu_solve(self._cap, self.Z.T @ x)
        return x

    def solve(self, B):
        """Apply the (possibly updated) bordered matrix inverse to each column of ``B``.

        Columns are solved one at a time so the result for a column does not
        depend on which other columns are passed along with it.
        """
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            return self._solve_one(B)
        X = np.empty_like(B)
        for k in range(B.shape[1]):
            X[:, k] = self._solve_one(np.ascontiguousarray(B[:, k]))
        return X

    def refresh(self, state):
        if self.cfg.update:
            wI = state.V_Im[:, 0] if self.mode == "complex" else None
            self.smw_update(state.V_Re[:, 0], wI)

    def apply_blocks(self, VR, VI, lR, lI):
        return self._unstack(self.solve(self._stack(VR, VI, lR, lI)))


class HierarchicalGaussSeidel(ConstraintMeanBased):
    """Symmetric block Gauss-Seidel over total-degree blocks."""

    def __init__(self, problem, state0, cfg):
        super().__init__(problem, state0, cfg)
        basis = problem.basis
        self.blocks = basis.degree_blocks()
        self.n_t = basis_size(basis.m_xi, cfg.p_t)
        self.Hd = np.array(problem.H.dense()[:self.n_t])
        self.coeffs = state0.copy()

    def refresh(self, state):
        super().refresh(state)
        if not self.cfg.freeze_coeffs:
            self.coeffs = state.copy()

    def _coupling(self, X, src, tgt):
        """``sum_t A_t(X[:, src]) H_t[src, tgt]`` over the retained ``t``."""
        XR, XI, xlR, xlI = X
        st = self.coeffs
        complex_mode = self.mode == "complex"
        nt = tgt.stop - tgt.start
        UR = np.zeros((self.n_x, nt))
        YR = np.zeros((self.n_x, nt))
        GR = np.zeros(nt)
        if complex_mode:
            UI = np.zeros((self.n_x, nt))
            YI = np.zeros((self.n_x, nt))
            GI = np.zeros(nt)
        n_nu = len(self.problem.terms)
        for t in range(self.n_t):
            Hs = self.Hd[t, src, tgt]
            if not Hs.any():
                continue
            aR = XR[:, src] @ Hs
            bR = xlR[src] @ Hs
            vR = st.V_Re[:, t]
            lamR = st.lam_Re[t]
            if t < n_nu:
                UR += self.problem.terms[t] @ aR
                self.k_mults += 1
            if complex_mode:
                aI = XI[:, src] @ Hs
                bI = xlI[src] @ Hs
                vI = st.V_Im[:, t]
                lamI = st.lam_Im[t]
                if t < n_nu:
                    UI += self.problem.terms[t] @ aI
                    self.k_mults += 1
                YR += -lamR * aR + lamI * aI - np.outer(vR, bR) + np.outer(vI, bI)
                YI += -lamR * aI - lamI * aR - np.outer(vR, bI) - np.outer(vI, bR)
                GR -= vR @ aR
                GI -= vI @ aI
            else:
                YR += -lamR * aR - np.outer(vR, bR)
                GR -= vR @ aR
        UR += self.M @ YR
        if complex_mode:
            UI += self.M @ YI
            return UR, UI, GR, GI
        return UR, None, GR, None

    def _solve_block(self, X, R, blk, upd=()):
        s = slice(*blk)
        rhs = [None if r is None else r[..., s].copy() for r in R]
        for U in upd:
            for r, u in zip(rhs, U):
                if r is not None:
                    r -= u
        out = self._unstack(self.solve(self._stack(*rhs)))
        for x, o in zip(X, out):
            if x is not None:
                x[..., s] = o

    def apply_blocks(self, VR, VI, lR, lI):
        R = (np.asarray(VR, dtype=float), None if VI is None else np.asarray(VI, dtype=float),
             np.asarray(lR, dtype=float), None if lI is None else np.asarray(lI, dtype=float))
        X = tuple(None if r is None else np.zeros_like(r) for r in R)
        blocks = self.blocks
        p = len(blocks) - 1
        N = self.n_xi
        low = lambda d: slice(0, blocks[d][0])
        high = lambda d: slice(blocks[d][1], N)
        cur = lambda d: slice(*blocks[d])
        self._solve_block(X, R, blocks[0])
        for d in range(1, p + 1):
            self._solve_block(X, R, blocks[d], [self._coupling(X, low(d), cur(d))])
        for d in range(p - 1, 0, -1):
            self._solve_block(X, R, blocks[d], [self._coupling(X, low(d), cur(d)),
                                                self._coupling(X, high(d), cur(d))])
        if p >= 1:
            self._solve_block(X, R, blocks[0], [self._coupling(X, high(0), cur(0))])
        return X


def build_preconditioner(problem, state0, cfg=None):
    """Build a preconditioner from the initial (mean) state ``state0``."""
    cfg = (cfg or PrecondConfig()).resolved(problem.basis.p)
    problem.check_state(state0)
    if state0.mode not in ("complex", "real"):
        raise InputError("bad state mode")
    cls = {"MB": MeanBased, "cMB": ConstraintMeanBased, "cMBu": ConstraintMeanBased,
           "chGS": HierarchicalGaussSeidel}[cfg.kind]
    return cls(problem, state0, cfg)


build = build_preconditioner
