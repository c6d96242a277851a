"""Stochastic Galerkin eigenvalue system in matricized form.

The eigenpair expansions ``v(xi) = sum_k v_k psi_k(xi)`` and
``lam(xi) = sum_k lam_k psi_k(xi)`` are stored as coefficient matrices
``V_Re, V_Im`` (n_x by n_xi, column k for psi_k) and vectors
``lam_Re, lam_Im``.  Kronecker products are never formed: products use
``(H kron K) vec(V) = vec(K V H^T)``.

Stacked vector layout: ``[vec(V_Re); vec(V_Im); lam_Re; lam_Im]`` with
column-major ``vec``; in real mode ``[vec(V_Re); lam_Re]``.  The residual
is ``r = [F; -G/2]`` where ``F`` collects the Galerkin-projected eigen
equations and ``G_i = tr(V H_i V^T) - delta_1i`` per part.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .deig import rightmost_pair
from .errors import ConfigurationError, InputError, ModeError
from .gpc import GpcBasis, triple_product_tensor

REAL_MODE_TOL = 1e-12


@dataclass(eq=False)
class SGEigenState:
    """Coefficients of the eigenpair expansion.

    In ``"real"`` mode ``V_Im`` and ``lam_Im`` are ``None``.
    """

    V_Re: np.ndarray
    lam_Re: np.ndarray
    V_Im: np.ndarray = None
    lam_Im: np.ndarray = None
    mode: str = "complex"

    def __post_init__(self):
        if self.mode not in ("complex", "real"):
            raise InputError(f"unknown mode {self.mode!r}")
        self.V_Re = np.asarray(self.V_Re, dtype=float)
        self.lam_Re = np.asarray(self.lam_Re, dtype=float).reshape(-1)
        if self.mode == "complex":
            if self.V_Im is None or self.lam_Im is None:
                raise InputError("complex mode needs imaginary blocks")
            self.V_Im = np.asarray(self.V_Im, dtype=float)
            self.lam_Im = np.asarray(self.lam_Im, dtype=float).reshape(-1)
            if self.V_Im.shape != self.V_Re.shape or self.lam_Im.shape != self.lam_Re.shape:
                raise InputError("real and imaginary blocks differ in shape")
        else:
            self.V_Im = None
            self.lam_Im = None
        if self.V_Re.ndim != 2 or self.V_Re.shape[1] != self.lam_Re.size:
            raise InputError("V must be n_x by n_xi with n_xi eigenvalue coefficients")

    @property
    def n_x(self):
        return self.V_Re.shape[0]

    @property
    def n_xi(self):
        return self.V_Re.shape[1]

    @property
    def size(self):
        return (2 if self.mode == "complex" else 1) * (self.n_x + 1) * self.n_xi

    @property
    def lam(self):
        """Complex eigenvalue coefficients."""
        return self.lam_Re + 1j * (self.lam_Im if self.mode == "complex" else 0.0)

    @property
    def V(self):
        """Complex eigenvector coefficients."""
        return self.V_Re + 1j * (self.V_Im if self.mode == "complex" else 0.0)

    def to_vector(self):
        parts = [self.V_Re.reshape(-1, order="F")]
        if self.mode == "complex":
            parts.append(self.V_Im.reshape(-1, order="F"))
        parts.append(self.lam_Re)
        if self.mode == "complex":
            parts.append(self.lam_Im)
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, x, n_x, n_xi, mode):
        VR, VI, lR, lI = split_vector(x, n_x, n_xi, mode)
        return cls(VR.copy(), lR.copy(), None if VI is None else VI.copy(),
                   None if lI is None else lI.copy(), mode)

    def copy(self):
        return SGEigenState.from_vector(self.to_vector(), self.n_x, self.n_xi, self.mode)

    def axpy(self, alpha, x):
        """New state ``self + alpha * x`` for a stacked increment ``x``."""
        return SGEigenState.from_vector(self.to_vector() + alpha * x, self.n_x, self.n_xi, self.mode)

    def evaluate(self, basis, points):
        """Sampled expansions: ``lam(xi)`` (N,) and ``v(xi)`` (N, n_x), complex."""
        psi = basis.evaluate(points)
        return psi @ self.lam, psi @ self.V.T


def split_vector(x, n_x, n_xi, mode):
    """Views ``(V_Re, V_Im, lam_Re, lam_Im)`` of a stacked vector (imaginary parts ``None`` in real mode)."""
    x = np.asarray(x)
    nv = n_x * n_xi
    if mode == "complex":
        if x.size != 2 * (nv + n_xi):
            raise InputError(f"vector of length {x.size} does not match complex layout")
        VR = x[:nv].reshape((n_x, n_xi), order="F")
        VI = x[nv:2 * nv].reshape((n_x, n_xi), order="F")
        return VR, VI, x[2 * nv:2 * nv + n_xi], x[2 * nv + n_xi:]
    if x.size != nv + n_xi:
        raise InputError(f"vector of length {x.size} does not match real layout")
    return x[:nv].reshape((n_x, n_xi), order="F"), None, x[nv:], None


def join_vector(VR, VI, lR, lI):
    parts = [np.asarray(VR).reshape(-1, order="F")]
    if VI is not None:
        parts.append(np.asarray(VI).reshape(-1, order="F"))
    parts.append(np.asarray(lR).reshape(-1))
    if lI is not None:
        parts.append(np.asarray(lI).reshape(-1))
    return np.concatenate(parts)


class SGProblem:
    """Operator, basis and triple-product tensor for the Galerkin system.

    The tensor holds ``max(n_nu, n_xi)`` slices: operator sums use the first
    ``n_nu`` and eigenvalue couplings the first ``n_xi``.
    """

    def __init__(self, A, basis=None, tensor=None):
        if basis is None:
            basis = GpcBasis(A.family, A.m_xi, A.p)
        if basis.family != A.family or basis.m_xi != A.m_xi:
            raise ConfigurationError("operator and basis use different random variables")
        n_slices = max(A.n_nu, basis.n_xi)
        if tensor is None:
            tensor = triple_product_tensor(basis, n_slices)
        if tensor.n_xi != basis.n_xi or tensor.n_nu < n_slices:
            raise ConfigurationError(f"tensor of shape {tensor.n_nu}x{tensor.n_xi} does not cover "
                                     f"{n_slices} slices for n_xi={basis.n_xi}")
        self.A = A
        self.basis = basis
        self.H = tensor
        self.M = A.mass
        self.MT = A.mass.T.tocsr()
        self.terms = A.terms
        self.terms_T = [K.T.tocsr() for K in A.terms]
        n = basis.n_xi
        sel = tensor.l < A.n_nu
        rows = tensor.l[sel] * n + tensor.j[sel]
        self._T = sp.csr_matrix((tensor.val[sel], (rows, tensor.k[sel])), shape=(A.n_nu * n, n))
        self._TT = self._T.T.tocsr()
        self.op_count = 0

    @property
    def n_x(self):
        return self.A.n_x

    @property
    def n_xi(self):
        return self.basis.n_xi

    def op(self, X, transpose=False):
        """``sum_l K_l X H_l`` (or with ``K_l^T``) over the operator terms."""
        terms = self.terms_T if transpose else self.terms
        KX = np.empty((self.n_x, len(terms) * self.n_xi))
        n = self.n_xi
        for l, K in enumerate(terms):
            KX[:, l * n:(l + 1) * n] = K @ X
        self.op_count += len(terms)
        return (self._TT @ KX.T).T

    def hcomb(self, c):
        return self.H.combine(c)

    def contract(self, Q):
        return self.H.contract(Q)[:self.n_xi]

    def check_state(self, state):
        if state.n_x != self.n_x or state.n_xi != self.n_xi:
            raise ConfigurationError(f"state is {state.n_x}x{state.n_xi}, problem is {self.n_x}x{self.n_xi}")


@dataclass(eq=False)
class SGResidual:
    """Blocks ``F`` and ``G`` of the nonlinear residual and the rescaled vector ``[F; -G/2]``."""

    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        self.vector = np.concatenate([self.F, -0.5 * self.G])
        self.norm = float(np.linalg.norm(self.vector))


def _e1(n):
    e = np.zeros(n)
    e[0] = 1.0
    return e


def residual(state, problem):
    """Nonlinear residual of the Galerkin eigen system at ``state``."""
    problem.check_state(state)
    M = problem.M
    n = problem.n_xi
    VR, lR = state.V_Re, state.lam_Re
    HR = problem.hcomb(lR)
    if state.mode == "real":
        FR = problem.op(VR) - M @ VR @ HR
        GR = problem.contract(VR.T @ VR) - _e1(n)
        return SGResidual(FR.reshape(-1, order="F"), GR)
    VI, lI = state.V_Im, state.lam_Im
    HI = problem.hcomb(lI)
    FR = problem.op(VR) - M @ (VR @ HR - VI @ HI)
    FI = problem.op(VI) - M @ (VR @ HI + VI @ HR)
    GR = problem.contract(VR.T @ VR) - _e1(n)
    GI = problem.contract(VI.T @ VI) - _e1(n)
    return SGResidual(np.concatenate([FR.reshape(-1, order="F"), FI.reshape(-1, order="F")]),
                      np.concatenate([GR, GI]))


def normalization_kron(V, tensor, n_xi=None):
    """``[vec(V)^T (H_i kron I) vec(V)]_i`` with explicit Kronecker products."""
    n_xi = tensor.n_xi if n_xi is None else n_xi
    v = V.reshape(-1, order="F")
    I = sp.identity(V.shape[0], format="csr")
    return np.array([v @ (sp.kron(tensor.slice(i), I) @ v) for i in range(n_xi)])


def normalization_trace(V, tensor, n_xi=None):
    """``[tr(V H_i V^T)]_i`` via the trace identity."""
    n_xi = tensor.n_xi if n_xi is None else n_xi
    return tensor.contract(V.T @ V)[:n_xi]


def apply_jacobian(state, problem, direction):
    """Product of the rescaled Jacobian ``d[F; -G/2]`` with a stacked direction."""
    problem.check_state(state)
    if isinstance(direction, SGEigenState):
        direction = direction.to_vector()
    dVR, dVI, dlR, dlI = split_vector(direction, state.n_x, state.n_xi, state.mode)
    M = problem.M
    VR, lR = state.V_Re, state.lam_Re
    HR = problem.hcomb(lR)
    HdR = problem.hcomb(dlR)
    if state.mode == "real":
        FR = problem.op(dVR) - M @ (dVR @ HR + VR @ HdR)
        CR = -problem.contract(VR.T @ dVR)
        return join_vector(FR, None, CR, None)
    VI, lI = state.V_Im, state.lam_Im
    HI = problem.hcomb(lI)
    HdI = problem.hcomb(dlI)
    FR = problem.op(dVR) - M @ (dVR @ HR - dVI @ HI + VR @ HdR - VI @ HdI)
    FI = problem.op(dVI) - M @ (dVR @ HI + dVI @ HR + VI @ HdR + VR @ HdI)
    CR = -problem.contract(VR.T @ dVR)
    CI = -problem.contract(VI.T @ dVI)
    return join_vector(FR, FI, CR, CI)


def apply_jacobian_transpose(state, problem, vector):
    """Adjoint of :func:`apply_jacobian` in the Euclidean inner product."""
    problem.check_state(state)
    yR, yI, gR, gI = split_vector(vector, state.n_x, state.n_xi, state.mode)
    MT = problem.MT
    VR, lR = state.V_Re, state.lam_Re
    HR = problem.hcomb(lR)
    if state.mode == "real":
        MyR = MT @ yR
        dVR = problem.op(yR, transpose=True) - MyR @ HR - VR @ problem.hcomb(gR)
        dlR = -problem.contract(VR.T @ MyR)
        return join_vector(dVR, None, dlR, None)
    VI, lI = state.V_Im, state.lam_Im
    HI = problem.hcomb(lI)
    MyR = MT @ yR
    MyI = MT @ yI
    dVR = problem.op(yR, transpose=True) - MyR @ HR - MyI @ HI - VR @ problem.hcomb(gR)
    dVI = problem.op(yI, transpose=True) + MyR @ HI - MyI @ HR - VI @ problem.hcomb(gI)
    dlR = -problem.contract(VR.T @ MyR) - problem.contract(VI.T @ MyI)
    dlI = problem.contract(VI.T @ MyR) - problem.contract(VR.T @ MyI)
    return join_vector(dVR, dVI, dlR, dlI)


def split_parts(v, lam, mode=None):
    """Real and imaginary eigenvector parts normalized for the Galerkin constraints.

    Complex mode: the phase is chosen so that ``Re(v)`` and ``Im(v)`` have
    equal norm, then both are scaled to one, which keeps ``v`` an
    eigenvector.  Real mode: the phase making ``v`` real, scaled to one.
    Returns ``(w_Re, w_Im, mode)`` with ``w_Im`` ``None`` in real mode.
    """
    v = np.asarray(v, dtype=complex)
    lam = complex(lam)
    if mode is None:
        mode = "real" if abs(lam.imag) <= REAL_MODE_TOL * abs(lam) else "complex"
    s = np.sum(v * v)
    if mode == "real":
        w = v * np.exp(-0.5j * np.angle(s)) if abs(s) > 0 else v
        wr = w.real
        return wr / np.linalg.norm(wr), None, mode
    theta = 0.5 * (0.5 * np.pi - np.angle(s))
    w = v * np.exp(1j * theta)
    wr, wi = w.real, w.imag
    scale = 1.0 / np.linalg.norm(wr)
    return wr * scale, wi * scale, mode


def init_from_mean(problem, mode=None, pair=None):
    """Initial state from the rightmost eigenpair of the mean pencil ``(K_1, M)``.

    Column 1 holds the mean eigenvector parts and ``lam_1`` the mean
    eigenvalue; all other coefficients are zero.  ``mode`` is detected from
    the mean eigenvalue unless given.
    """
    if pair is None:
        pair = rightmost_pair(problem.A.terms[0], problem.M)
    wr, wi, mode = split_parts(pair.v, pair.lam, mode)
    n_x, n_xi = problem.n_x, problem.n_xi
    VR = np.zeros((n_x, n_xi))
    VR[:, 0] = wr
    lR = np.zeros(n_xi)
    lR[0] = pair.lam.real
    if mode == "real":
        return SGEigenState(VR, lR, mode="real")
    VI = np.zeros((n_x, n_xi))
    VI[:, 0] = wi
    lI = np.zeros(n_xi)
    lI[0] = pair.lam.imag
    return SGEigenState(VR, lR, VI, lI, "complex")


def reduce_to_real(state, tol=1e-8):
    """Drop the imaginary blocks of a state whose imaginary part vanishes."""
    if state.mode == "real":
        return state
    if np.linalg.norm(state.V_Im) > tol or np.linalg.norm(state.lam_Im) > tol * max(1.0, np.linalg.norm(state.lam_Re)):
        raise ModeError("state has a nonzero imaginary part; real mode does not apply")
    return SGEigenState(state.V_Re.copy(), state.lam_Re.copy(), mode="real")


def sample_residuals(state, problem, points):
    """Relative eigen-residuals ``|K v - lam M v| / (|lam| |M v|)`` of the sampled expansion."""
    lam, V = state.evaluate(problem.basis, points)
    out = np.empty(len(points))
    M = problem.M
    for q, xi in enumerate(np.atleast_2d(points)):
        K = problem.A.sample(xi)
        v = V[q]
        Mv = M @ v
        out[q] = np.linalg.norm(K @ v - lam[q] * Mv) / (abs(lam[q]) * np.linalg.norm(Mv))
    return out


def sample_normalization(state, problem, points):
    """Deviations ``v_Re(xi)^T v_Re(xi) - 1`` (and the imaginary analogue) at ``points``."""
    psi = problem.basis.evaluate(points)
    vr = psi @ state.V_Re.T
    out = [np.sum(vr * vr, axis=1) - 1.0]
    if state.mode == "complex":
        vi = psi @ state.V_Im.T
        out.append(np.sum(vi * vi, axis=1) - 1.0)
    return np.stack(out, axis=1)


def save_state(state, path):
    """Checkpoint: header ``mode n_x n_xi`` then the stacked vector, one value per line."""
    x = state.to_vector()
    with open(path, "w") as fh:
        fh.write(f"{state.mode} {state.n_x} {state.n_xi}\n")
        fh.write("".join(f"{v:.17g}\n" for v in x))


def load_state(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3:
            raise InputError(f"{path}: malformed checkpoint header")
        mode, n_x, n_xi = head[0], int(head[1]), int(head[2])
        x = np.array([float(line) for line in fh if line.strip()])
    return SGEigenState.from_vector(x, n_x, n_xi, mode)
