"""Exact rational linear algebra for small dense systems.

Finite-chain quantities (stationary measure, Poisson solution, variance)
are rationals; solving them exactly removes every tolerance question from
the fixtures. Complexity is O(m^3) Fraction operations, fine for the
chain sizes this package targets.
"""

from __future__ import annotations

from fractions import Fraction

Matrix = list[list[Fraction]]
Vector = list[Fraction]


def solve_linear(a: Matrix, b: Vector) -> Vector | None:
    """Solve a x = b by fraction-exact Gaussian elimination.

    Returns None when the matrix is singular. ``a`` and ``b`` are not
    modified.
    """
    m = len(a)
    aug = [[Fraction(v) for v in row] + [Fraction(b[i])] for i, row in enumerate(a)]
    for col in range(m):
        pivot = next((r for r in range(col, m) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        if pivot != col:
            aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [vr - factor * vc for vr, vc in zip(aug[r], aug[col])]
    return [aug[r][m] for r in range(m)]


def mat_vec(a: Matrix, v: Vector) -> Vector:
    return [sum((row[j] * v[j] for j in range(len(v))), Fraction(0)) for row in a]


def dot(u: Vector, v: Vector) -> Fraction:
    return sum((ui * vi for ui, vi in zip(u, v)), Fraction(0))


def stationary_exact(p: Matrix) -> Vector | None:
    """Left fixed point nu P = nu with sum(nu) = 1, exact.

    Builds (P^T - I) with the last equation replaced by the normalization
    row of ones. Returns None if the system is singular (reducible chain).
    """
    m = len(p)
    a: Matrix = [
        [p[j][i] - (1 if i == j else 0) for j in range(m)] for i in range(m)
    ]
    a[m - 1] = [Fraction(1)] * m
    b: Vector = [Fraction(0)] * (m - 1) + [Fraction(1)]
    nu = solve_linear(a, b)
    if nu is None:
        return None
    # A reducible chain can still yield a (non-unique) solution; the caller
    # decides irreducibility by graph search. Negative entries mean the
    # solved fixed point is not a probability vector.
    if any(v < 0 for v in nu):
        return None
    return nu


def poisson_exact(p: Matrix, f: Vector, nu: Vector) -> Vector | None:
    """Solve theta - P theta = f with nu(theta) = 0, exact.

    The system is singular with nullspace spanned by constants; adding the
    rank-one term 1 * nu^T makes it invertible for irreducible chains and
    pins nu(theta) = nu(f) = 0 when f is centered. Returns None when the
    modified system is singular.
    """
    m = len(p)
    a: Matrix = [
        [
            (1 if i == j else 0) - p[i][j] + nu[j]
            for j in range(m)
        ]
        for i in range(m)
    ]
    return solve_linear(a, f)
