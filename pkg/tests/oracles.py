"""Independent reference constructions used by the tests.

Everything here is assembled densely with explicit Kronecker products or
closed-form formulas, sharing no code paths with the matricized library
routines beyond basic data access.
"""

from math import factorial

import numpy as np
import scipy.sparse as sp

from sgeig.gpc import graded_indices


def hermite_triple(a, b, c):
    """``E[psi_a psi_b psi_c]`` for orthonormal Hermite polynomials (closed form)."""
    s2 = a + b + c
    if s2 % 2 or max(a, b, c) > s2 // 2:
        return 0.0
    s = s2 // 2
    num = factorial(a) * factorial(b) * factorial(c)
    val = num / (factorial(s - a) * factorial(s - b) * factorial(s - c))
    return val / np.sqrt(num)


def legendre_triple(a, b, c):
    """``E[psi_a psi_b psi_c]`` for orthonormal Legendre polynomials via series algebra."""
    L = np.polynomial.legendre
    ea = np.zeros(a + 1)
    ea[a] = 1
    eb = np.zeros(b + 1)
    eb[b] = 1
    ec = np.zeros(c + 1)
    ec[c] = 1
    prod = L.legmul(L.legmul(ea, eb), ec)
    return prod[0] * np.sqrt((2 * a + 1) * (2 * b + 1) * (2 * c + 1))


def dense_slices(problem):
    return [problem.H.slice(l).toarray() for l in range(problem.H.n_nu)]


def dense_F(state, problem):
    """Galerkin residual assembled with Kronecker products."""
    Hs = dense_slices(problem)
    A = problem.A
    M = A.mass.toarray()
    n = problem.n_xi
    KK = sum(np.kron(Hs[l], A.terms[l].toarray()) for l in range(A.n_nu))
    vR = state.V_Re.reshape(-1, order="F")
    LR = sum(state.lam_Re[l] * np.kron(Hs[l], M) for l in range(n))
    if state.mode == "real":
        FR = KK @ vR - LR @ vR
        G = np.array([vR @ np.kron(Hs[i], np.eye(A.n_x)) @ vR for i in range(n)])
        G[0] -= 1
        return FR, G
    vI = state.V_Im.reshape(-1, order="F")
    LI = sum(state.lam_Im[l] * np.kron(Hs[l], M) for l in range(n))
    FR = KK @ vR - LR @ vR + LI @ vI
    FI = KK @ vI - LI @ vR - LR @ vI
    I = np.eye(A.n_x)
    GR = np.array([vR @ np.kron(Hs[i], I) @ vR for i in range(n)])
    GI = np.array([vI @ np.kron(Hs[i], I) @ vI for i in range(n)])
    GR[0] -= 1
    GI[0] -= 1
    return np.concatenate([FR, FI]), np.concatenate([GR, GI])


def dense_jacobian(state, problem):
    """Rescaled Jacobian ``d[F; -G/2]`` assembled with Kronecker products."""
    Hs = dense_slices(problem)
    A = problem.A
    M = A.mass.toarray()
    n = problem.n_xi
    nx = A.n_x
    I = np.eye(nx)
    KK = sum(np.kron(Hs[l], A.terms[l].toarray()) for l in range(A.n_nu))
    vR = state.V_Re.reshape(-1, order="F")
    LR = sum(state.lam_Re[l] * np.kron(Hs[l], M) for l in range(n))
    BR = np.stack([-np.kron(Hs[l], M) @ vR for l in range(n)], axis=1)
    CR = -np.stack([vR @ np.kron(Hs[i], I) for i in range(n)], axis=0)
    if state.mode == "real":
        return np.block([[KK - LR, BR], [CR, np.zeros((n, n))]])
    vI = state.V_Im.reshape(-1, order="F")
    LI = sum(state.lam_Im[l] * np.kron(Hs[l], M) for l in range(n))
    BI_R = np.stack([np.kron(Hs[l], M) @ vI for l in range(n)], axis=1)
    BR_I = np.stack([-np.kron(Hs[l], M) @ vI for l in range(n)], axis=1)
    BI_I = np.stack([-np.kron(Hs[l], M) @ vR for l in range(n)], axis=1)
    CI = -np.stack([vI @ np.kron(Hs[i], I) for i in range(n)], axis=0)
    Z = np.zeros((n, n * nx))
    z = np.zeros((n, n))
    return np.block([
        [KK - LR, LI, BR, BI_R],
        [-LI, KK - LR, BR_I, BI_I],
        [CR, Z, z, z],
        [Z, CI, z, z],
    ])


def interleave_perm(n_x, n_xi, mode):
    """Permutation from the stacked layout to per-column blocks ``(vR_k, vI_k, lR_k, lI_k)``.

    ``perm[i]`` is the stacked index of interleaved position ``i``.
    """
    nv = n_x * n_xi
    perm = []
    for k in range(n_xi):
        perm += list(range(k * n_x, (k + 1) * n_x))
        if mode == "complex":
            perm += list(range(nv + k * n_x, nv + (k + 1) * n_x))
            perm += [2 * nv + k, 2 * nv + n_xi + k]
        else:
            perm += [nv + k]
    return np.array(perm)


def dense_chgs_matrix(state_coeffs, problem, cmb_dense, p_t_count):
    """Dense symmetric block Gauss-Seidel preconditioner matrix ``(D + L) D^-1 (D + U)``.

    ``L``/``U`` are the strictly lower/upper total-degree blocks of the
    Jacobian truncated to the first ``p_t_count`` expansion functions, with
    coefficients taken from ``state_coeffs``; ``D`` repeats ``cmb_dense`` on
    every gPC column.  Returned in the stacked (not interleaved) layout.
    """
    st = state_coeffs
    A = problem.A
    M = A.mass.toarray()
    n = problem.n_xi
    nx = A.n_x
    complex_mode = st.mode == "complex"
    bs = 2 * nx + 2 if complex_mode else nx + 1
    Hd = problem.H.dense()
    deg = problem.basis.degrees
    J = np.zeros((n * bs, n * bs))
    for t in range(p_t_count):
        K = A.terms[t].toarray() if t < A.n_nu else np.zeros((nx, nx))
        vR = st.V_Re[:, t]
        lR = st.lam_Re[t]
        if complex_mode:
            vI = st.V_Im[:, t]
            lI = st.lam_Im[t]
            At = np.zeros((bs, bs))
            At[:nx, :nx] = K - lR * M
            At[:nx, nx:2 * nx] = lI * M
            At[:nx, 2 * nx] = -M @ vR
            At[:nx, 2 * nx + 1] = M @ vI
            At[nx:2 * nx, :nx] = -lI * M
            At[nx:2 * nx, nx:2 * nx] = K - lR * M
            At[nx:2 * nx, 2 * nx] = -M @ vI
            At[nx:2 * nx, 2 * nx + 1] = -M @ vR
            At[2 * nx, :nx] = -vR
            At[2 * nx + 1, nx:2 * nx] = -vI
        else:
            At = np.zeros((bs, bs))
            At[:nx, :nx] = K - lR * M
            At[:nx, nx] = -M @ vR
            At[nx, :nx] = -vR
        # output column j, input column k, weight h_{t,kj}
        J += np.kron(Hd[t].T, At)
    mask = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            mask[j, k] = 1.0 if deg[k] < deg[j] else 0.0
    Lm = J * np.kron(mask, np.ones((bs, bs)))
    Um = J * np.kron(mask.T, np.ones((bs, bs)))
    D = np.kron(np.eye(n), cmb_dense)
    P = (D + Lm) @ np.linalg.solve(D, D + Um)
    perm = interleave_perm(nx, n, st.mode)
    Pst = np.zeros_like(P)
    Pst[np.ix_(perm, perm)] = P
    return Pst


def dense_cmb(K1, M, muR, muI, wR, wI, eR=1.0, eI=1.0, mode="complex"):
    """Bordered constraint matrix assembled densely from its block definition."""
    K1 = K1.toarray() if sp.issparse(K1) else K1
    M = M.toarray() if sp.issparse(M) else M
    nx = K1.shape[0]
    if mode == "real":
        X = np.zeros((nx + 1, nx + 1))
        X[:nx, :nx] = K1 - eR * muR * M
        X[:nx, nx] = -M @ wR
        X[nx, :nx] = -wR
        return X
    X = np.zeros((2 * nx + 2, 2 * nx + 2))
    X[:nx, :nx] = K1 - eR * muR * M
    X[:nx, nx:2 * nx] = eI * muI * M
    X[nx:2 * nx, :nx] = -eI * muI * M
    X[nx:2 * nx, nx:2 * nx] = K1 - eR * muR * M
    X[:nx, 2 * nx] = -M @ wR
    X[:nx, 2 * nx + 1] = M @ wI
    X[nx:2 * nx, 2 * nx] = -M @ wI
    X[nx:2 * nx, 2 * nx + 1] = -M @ wR
    X[2 * nx, :nx] = -wR
    X[2 * nx + 1, nx:2 * nx] = -wI
    return X


def term_psi(family, m_xi, n_nu, points):
    from sgeig.gpc import evaluate_indices
    return evaluate_indices(family, graded_indices(m_xi, n_nu), points)
