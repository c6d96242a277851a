"""Polynomial chaos building blocks.

Builds the orthonormal Hermite and Legendre bases in two variables up to
total degree 3, checks their orthonormality under an exact Gauss rule,
assembles the triple-product tensors used by the Galerkin system and
constructs the level-4 sparse grid used for collocation.

Run with ``python3 demos/01_basis_and_quadrature.py``.
"""

import numpy as np

from sgeig import GpcBasis, gauss_rule, smolyak_grid, triple_product_tensor

for family, n_nu in (("hermite", 28), ("legendre", 3)):
    basis = GpcBasis(family, 2, 3)
    print(f"{family}: {basis.n_xi} basis functions, multi-indices in graded order")
    for k, (idx, deg) in enumerate(zip(basis.indices, basis.degrees)):
        print(f"  k={k + 1:2d}  degree {deg}  exponents {tuple(int(i) for i in idx)}")

    rule = gauss_rule(family, 4, 2)
    vals = basis.evaluate(rule.points)
    gram = vals.T @ (vals * rule.weights[:, None])
    print(f"  Gram matrix deviation from identity: {np.abs(gram - np.eye(basis.n_xi)).max():.1e}")

    # lognormal coefficients need the degree-6 terms, affine ones only degree 1
    H = triple_product_tensor(basis, n_nu)
    print(f"  triple-product tensor {n_nu} x {basis.n_xi} x {basis.n_xi}: {H.nnz} nonzeros")

    grid = smolyak_grid(family, 2, 4)
    print(f"  level-4 sparse grid: {grid.size} points, weights sum to {grid.weights.sum():.15f}\n")
