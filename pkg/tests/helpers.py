"""Independent brute-force oracles used by several test modules.

Everything here recomputes quantities from first principles with
Fractions and explicit path enumeration, deliberately sharing no code
with the package internals it checks.
"""

from fractions import Fraction


def enumerate_survival(chain, x, y, n_max):
    """Survival law by depth-first enumeration of every transition path.

    Walks each path of positive probability to depth n_max, killing a
    branch the first time y + S_k <= 0 (the start cell is exempt).
    Returns (p, e): tuples of P(tau > n) and E(y + S_n; tau > n) as
    Fractions. Exponential in n_max; keep n_max small.
    """
    ix = chain.state_index(x)
    y = Fraction(y)
    m = len(chain.labels)
    rows = [[(j, chain.transition[i][j]) for j in range(m)
             if chain.transition[i][j] > 0]
            for i in range(m)]
    f = [Fraction(v) for v in chain.f_values]
    p = [Fraction(0)] * (n_max + 1)
    e = [Fraction(0)] * (n_max + 1)
    p[0] = Fraction(1)
    e[0] = y
    stack = [(ix, y, Fraction(1), 0)]
    while stack:
        i, s, mass, depth = stack.pop()
        if depth == n_max:
            continue
        for j, pij in rows[i]:
            s2 = s + f[j]
            if s2 <= 0:
                continue
            m2 = mass * pij
            p[depth + 1] += m2
            e[depth + 1] += m2 * s2
            stack.append((j, s2, m2, depth + 1))
    return tuple(p), tuple(e)
