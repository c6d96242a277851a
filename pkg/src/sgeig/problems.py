"""Ready-made synthetic problems combining a random viscosity with the finite-difference generator."""

from .gpc import GpcBasis, basis_size
from .operators import synth_convection_diffusion
from .randomfield import (CovarianceKernel, affine_viscosity, discrete_kl, lognormal_viscosity,
                          node_grid)

DEFAULT_CORR = {"lognormal": (0.25, 0.25), "affine": (0.125, 0.25)}


def synthetic_problem(kind="affine", n=11, m_xi=2, p=3, cov=0.01, nu1=0.1, wind=(1.0, 0.5),
                      corr=None, dim=2, convention="projection"):
    """Convection-diffusion operator with a lognormal or affine random viscosity.

    Parameters
    ----------
    kind : {"affine", "lognormal"}
        Affine uniform viscosity (Legendre basis, ``n_nu = m_xi + 1``) or
        lognormal viscosity (Hermite basis, ``n_nu = C(m_xi + 2p, 2p)``).
    n : int
        Grid intervals per side; ``(n - 1)**dim`` unknowns.
    corr : (float, float), optional
        Correlation lengths as fractions of the unit domain.

    Returns
    -------
    (AffineOperator, ViscosityExpansion)
    """
    Lx, Ly = corr if corr is not None else DEFAULT_CORR[kind]
    pts, w = node_grid(n, dim)
    kl = discrete_kl(CovarianceKernel(1.0, Lx, Ly), pts, w, m_xi)
    if kind == "affine":
        visc = affine_viscosity(nu1, cov, kl)
    elif kind == "lognormal":
        basis = GpcBasis("hermite", m_xi, p)
        visc = lognormal_viscosity(nu1, cov, kl, basis, basis_size(m_xi, 2 * p), convention)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    A = synth_convection_diffusion(n, wind, visc, dim, p)
    A.info.update({"cov": cov, "nu1": nu1, "corr": [Lx, Ly]})
    return A, visc
