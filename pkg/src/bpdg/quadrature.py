"""1D Gauss and Gauss-Lobatto rules on the reference interval [-1/2, 1/2].

Weights are normalized to sum to 1 (cell-mean convention), so a rule applied
to a polynomial returns its mean over the cell rather than its integral.
Nodes are computed by Newton iteration on Legendre polynomials; no external
special-function library is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSS = "gauss"
GAUSS_LOBATTO = "gauss_lobatto"

_NEWTON_TOL = 1e-15
_MAX_ORDER = 16


@dataclass(frozen=True)
class QuadratureRule1D:
    """Nodes/weights on [-1/2, 1/2]; weights sum to 1, nodes increasing."""

    kind: str
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def _legendre(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate P_n and P_n' at x (on [-1,1]) via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for j in range(2, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _symmetrize(nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # enforce exact symmetry about 0 and a unit weight sum
    nodes = 0.5 * (nodes - nodes[::-1])
    if len(nodes) % 2 == 1:
        nodes[len(nodes) // 2] = 0.0
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return nodes, weights


def gauss_rule(q: int) -> QuadratureRule1D:
    """Q-point Gauss rule, exact for degree <= 2Q-1 on [-1/2, 1/2]."""
    if not 1 <= q <= _MAX_ORDER:
        raise ValueError(f"Gauss point count must be in 1..{_MAX_ORDER}, got {q}")
    if q == 1:
        return QuadratureRule1D(GAUSS, np.array([0.0]), np.array([1.0]))
    # Chebyshev initial guesses, then Newton on P_q
    x = -np.cos(np.pi * (np.arange(1, q + 1) - 0.25) / (q + 0.5))
    for _ in range(100):
        p, dp = _legendre(q, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = _legendre(q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    nodes, weights = _symmetrize(x / 2.0, w)
    return QuadratureRule1D(GAUSS, nodes, weights)


def gauss_lobatto_rule(n: int) -> QuadratureRule1D:
    """L-point Gauss-Lobatto rule, exact for degree <= 2L-3; endpoints included.

    Endpoint weights are 1/(L(L-1)) under the unit-sum convention.
    """
    if not 2 <= n <= _MAX_ORDER:
        raise ValueError(f"Gauss-Lobatto point count must be in 2..{_MAX_ORDER}, got {n}")
    if n == 2:
        return QuadratureRule1D(GAUSS_LOBATTO, np.array([-0.5, 0.5]), np.array([0.5, 0.5]))
    # interior nodes are the roots of P'_{n-1}; Newton on dp with second
    # derivative from the Legendre ODE
    m = n - 2
    x = -np.cos(np.pi * np.arange(1, m + 1) / (n - 1))
    for _ in range(100):
        p, dp = _legendre(n - 1, x)
        ddp = (2.0 * x * dp - (n - 1) * n * p) / (1.0 - x * x)
        dx = dp / ddp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x = np.concatenate(([-1.0], x, [1.0]))
    p, _ = _legendre(n - 1, x)
    w = 2.0 / (n * (n - 1) * p * p)
    nodes, weights = _symmetrize(x / 2.0, w)
    return QuadratureRule1D(GAUSS_LOBATTO, nodes, weights)


def monomial_mean(m: int) -> float:
    """Exact mean of x^m over [-1/2, 1/2]: 0 for odd m, (1/2)^m/(m+1) for even."""
    if m % 2 == 1:
        return 0.0
    return 0.5**m / (m + 1)


def exactness_defect(rule: QuadratureRule1D, degree: int) -> float:
    """Max over monomials x^m, m <= degree, of |rule applied to x^m - exact mean|."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    defect = 0.0
    for m in range(degree + 1):
        approx = float(np.sum(rule.weights * rule.nodes**m))
        defect = max(defect, abs(approx - monomial_mean(m)))
    return defect
