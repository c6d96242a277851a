"""Right-preconditioned GMRES and the line-search inexact Newton driver."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NumericalError, StagnationError
from .precond import PrecondConfig, build_preconditioner
from .sgcore import apply_jacobian, apply_jacobian_transpose, init_from_mean, residual


@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: list

    def __iter__(self):
        return iter((self.x, self.iterations, self.residual))


def gmres(apply_A, apply_P, b, rel_tol, max_it=200):
    """Full GMRES for ``A P^-1 y = b`` with ``x = P^-1 y`` and zero initial guess.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass and
    Givens rotations.  ``residual`` is the relative residual estimate
    ``|b - A x| / |b|``; ``history`` holds it after every iteration.
    Reaching ``max_it`` is reported through ``converged`` rather than raised.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        return GmresResult(np.zeros(n), 0, 0.0, True, [0.0])
    if apply_P is None:
        apply_P = lambda v: v
    m = max(1, min(int(max_it), n))
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = b / beta
    history = [1.0]
    k = 0
    rel = 1.0
    for j in range(m):
        w = np.array(apply_A(apply_P(V[j])), dtype=float)  # copy: operators may return their input
        wnorm0 = np.linalg.norm(w)
        for _ in range(2):
            for i in range(j + 1):
                hij = V[i] @ w
                H[i, j] += hij
                w -= hij * V[i]
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        denom = np.hypot(H[j, j], H[j + 1, j])
        if denom == 0.0:
            raise NumericalError("GMRES breakdown: singular Hessenberg column")
        cs[j] = H[j, j] / denom
        sn[j] = H[j + 1, j] / denom
        H[j, j] = denom
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        k = j + 1
        rel = abs(g[j + 1]) / beta
        history.append(rel)
        if rel <= rel_tol:
            break
        if hnext <= 1e-14 * max(wnorm0, 1e-300):
            raise NumericalError(f"GMRES breakdown with relative residual {rel:.3e}")
        V[j + 1] = w / hnext
    y = sla.solve_triangular(H[:k, :k], g[:k])
    x = apply_P(V[:k].T @ y)
    return GmresResult(x, k, rel, rel <= rel_tol, history)


@dataclass
class NewtonOptions:
    """Line-search Newton parameters."""

    rho: float = 0.9
    c: float = 0.25
    tau: float = 0.1
    tol: float = 1e-10
    max_newton: int = 30
    max_gmres: int = 200
    max_backtracks: int = 50

    def __post_init__(self):
        if not (0 < self.rho < 1 and 0 < self.c < 1 and self.tau > 0 and self.tol > 0):
            raise InputError("need 0 < rho < 1, 0 < c < 1, tau > 0, tol > 0")
        if self.max_newton < 0 or self.max_gmres < 1 or self.max_backtracks < 0:
            raise InputError("iteration limits must be nonnegative (max_gmres positive)")


@dataclass
class IterationLog:
    """Per-step record of the Newton iteration."""

    initial_residual: float = float("nan")
    steps: list = field(default_factory=list)
    converged: bool = False
    elapsed: float = 0.0

    COLUMNS = ("step", "gmres_iters", "residual", "alpha", "backtracks")

    def add(self, **row):
        self.steps.append(row)

    @property
    def n_steps(self):
        return len(self.steps)

    @property
    def gmres_counts(self):
        return [s["gmres_iters"] for s in self.steps]

    @property
    def total_gmres(self):
        return int(sum(self.gmres_counts))

    @property
    def residuals(self):
        return [self.initial_residual] + [s["residual"] for s in self.steps]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for s in self.steps:
                wr.writerow([s["step"], s["gmres_iters"], f"{s['residual']:.17g}",
                             f"{s['alpha']:.17g}", s["backtracks"]])

    def table(self):
        """Text table of GMRES iterations per step."""
        lines = ["step  gmres  residual     alpha"]
        for s in self.steps:
            lines.append(f"{s['step']:4d}  {s['gmres_iters']:5d}  {s['residual']:.3e}  {s['alpha']:.3g}")
        return "\n".join(lines)


def newton_solve(problem, cfg=None, opts=None, state0=None, mode=None):
    """Solve the Galerkin eigen system by line-search inexact Newton.

    Parameters
    ----------
    problem : SGProblem
    cfg : PrecondConfig, optional
    opts : NewtonOptions, optional
    state0 : SGEigenState, optional
        Starting point; defaults to the mean-problem initialization.
    mode : {"complex", "real"}, optional
        Overrides automatic mode detection for the default starting point.

    Returns
    -------
    (SGEigenState, IterationLog)
        ``log.converged`` is false if ``max_newton`` steps did not reach
        ``opts.tol``.

    Raises
    ------
    StagnationError
        If the search direction is not a descent direction or the line
        search runs out of backtracking steps.
    """
    cfg = cfg or PrecondConfig()
    opts = opts or NewtonOptions()
    t0 = time.perf_counter()
    state = state0.copy() if state0 is not None else init_from_mean(problem, mode=mode)
    problem.check_state(state)
    pre = build_preconditioner(problem, state, cfg)
    r = residual(state, problem)
    f = 0.5 * r.norm ** 2
    log = IterationLog(initial_residual=r.norm)
    prev_norm = 1.0
    step = 0
    while r.norm >= opts.tol and step < opts.max_newton:
        step += 1
        pre.refresh(state)
        rel_tol = min(opts.tau * prev_norm, opts.tau)
        cur = state
        res = gmres(lambda x: apply_jacobian(cur, problem, x), pre.apply, -r.vector, rel_tol, opts.max_gmres)
        p = res.x
        slope = float(apply_jacobian_transpose(cur, problem, r.vector) @ p)
        if not slope < 0:
            log.elapsed = time.perf_counter() - t0
            raise StagnationError(f"step {step}: search direction is not a descent direction "
                                  f"(slope {slope:.3e})", state, log)
        alpha = 1.0
        backtracks = 0
        while True:
            trial = state.axpy(alpha, p)
            rt = residual(trial, problem)
            ft = 0.5 * rt.norm ** 2
            if ft <= f + opts.c * alpha * slope:
                break
            backtracks += 1
            if backtracks > opts.max_backtracks:
                log.elapsed = time.perf_counter() - t0
                raise StagnationError(f"step {step}: line search failed after {opts.max_backtracks} "
                                      f"backtracks (residual {r.norm:.3e})", state, log)
            alpha *= opts.rho
        prev_norm = r.norm
        state, r, f = trial, rt, ft
        log.add(step=step, gmres_iters=res.iterations, residual=r.norm, alpha=alpha,
                backtracks=backtracks, gmres_residual=res.residual, gmres_converged=res.converged,
                gmres_tol=rel_tol)
    log.converged = r.norm < opts.tol
    log.elapsed = time.perf_counter() - t0
    log.k_mults = pre.k_mults
    return state, log
