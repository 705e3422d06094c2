"""Problem builders shared by the test modules."""

import numpy as np

from tikhonov_lab.core import GridVector, Problem
from tikhonov_lab.operators import DiagonalOperator
from tikhonov_lab.penalty import SquaredNorm
from tikhonov_lab.similarity import NormSimilarity

# filled by the acceptance tests and echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(label, ok, detail):
    """Record and print one pass/fail line, then assert the outcome."""
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def holder_problem(n=200, mu=0.5, h=1.0, weight=0.5):
    """``sigma_k = 1/k`` and ``u+_k = sigma_k**mu * k**(-weight)``."""
    op = DiagonalOperator.power_law(n, 1.0, h)
    k = np.arange(1, n + 1, dtype=float)
    u = GridVector(op.sigma ** mu * k ** (-weight), h)
    return Problem.build(op, SquaredNorm(), NormSimilarity(), u, 2.0)


def diagonal_problem(sigma, xi_source, h=1.0):
    """Quadratic problem whose subgradient ``2 u+`` equals ``xi_source``."""
    op = DiagonalOperator(np.asarray(sigma, float), h)
    u = GridVector(0.5 * np.asarray(xi_source, float), h)
    return Problem.build(op, SquaredNorm(), NormSimilarity(), u, 2.0)


def transport_lp(x, a, b, q=1.0):
    """``W_q`` by solving the discrete transport linear program with dual simplex."""
    from scipy.optimize import linprog

    x = np.asarray(x, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n, m = a.size, b.size
    cost = np.abs(x[:, None] - x[None, :]) ** q
    rows = np.zeros((n + m, n * m))
    for i in range(n):
        rows[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        rows[n + j, j::m] = 1.0
    res = linprog(cost.ravel(), A_eq=rows, b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs-ds")
    assert res.status == 0, res.message
    return max(res.fun, 0.0) ** (1.0 / q)
