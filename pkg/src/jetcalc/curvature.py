"""Formal Levi-Civita connection and Ricci tensor of a metric field.

Built from jets of the covariant metric components with inverse entries as
opaque calls; used by the bundled Einstein-Hilbert example and as an
independent construction route in tests.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict

from . import expr as ex
from .jets import total_derivative
from .multiindex import MultiIndex
from .problem import JetProblem


def christoffel(problem: JetProblem) -> Dict[tuple, ex.Expr]:
    """gamma^l_{ab} = 1/2 g^{lr} (D_a g_{rb} + D_b g_{ra} - D_r g_{ab})."""
    mf = problem.metric_field
    if mf is None:
        raise ValueError("problem has no metric field")
    n = problem.n
    half = Fraction(1, 2)

    def dg(r, b, a):
        return problem.jet(mf, (r, b), MultiIndex.unit(a, n))

    out: Dict[tuple, ex.Expr] = {}
    for l in range(n):
        for a in range(n):
            for b in range(a, n):
                e = ex.esum(
                    problem.metric_inverse(l, r)
                    * (dg(r, b, a) + dg(r, a, b) - dg(a, b, r))
                    for r in range(n)
                )
                out[(l, a, b)] = half * e
                if a != b:
                    out[(l, b, a)] = out[(l, a, b)]
    return out


def ricci(problem: JetProblem, gamma: Dict[tuple, ex.Expr] = None) -> Dict[tuple, ex.Expr]:
    """R_{ab} = D_m gamma^m_{ab} - D_b gamma^m_{am}
               + gamma^m_{nm} gamma^n_{ab} - gamma^m_{nb} gamma^n_{am}."""
    mf = problem.metric_field
    if mf is None:
        raise ValueError("problem has no metric field")
    n, cap = problem.n, problem.order
    if gamma is None:
        gamma = christoffel(problem)
    trace = [ex.esum(gamma[(m, nu, m)] for m in range(n)) for nu in range(n)]
    out: Dict[tuple, ex.Expr] = {}
    for a in range(n):
        for b in range(a, n):
            e = ex.esum(total_derivative(gamma[(m, a, b)], m, cap) for m in range(n))
            e = e - ex.esum(total_derivative(gamma[(m, a, m)], b, cap) for m in range(n))
            e = e + ex.esum(trace[nu] * gamma[(nu, a, b)] for nu in range(n))
            e = e - ex.esum(
                gamma[(m, nu, b)] * gamma[(nu, a, m)] for m in range(n) for nu in range(n)
            )
            out[(a, b)] = e
            if a != b:
                out[(b, a)] = e
    return out


def einstein_hilbert_density(problem: JetProblem, kappa: ex.Expr) -> ex.Expr:
    """lambda_H = -1/(2 kappa) sqrt|g| g^{ab} R_{ab}."""
    n = problem.n
    r = ricci(problem)
    scal = ex.esum(
        problem.metric_inverse(a, b) * r[(a, b)] for a in range(n) for b in range(n)
    )
    return Fraction(-1, 2) * problem.metric_sqrtdet() * scal * kappa ** -1


def covariant_vector_gradient(problem: JetProblem, xi, gamma=None) -> Dict[tuple, ex.Expr]:
    """nabla_a xi^m = D_a xi^m + gamma^m_{ar} xi^r for a component family xi."""
    n, cap = problem.n, problem.order
    if gamma is None:
        gamma = christoffel(problem)
    out = {}
    for a in range(n):
        for m in range(n):
            e = total_derivative(ex.as_expr(xi[m]), a, cap)
            e = e + ex.esum(gamma[(m, a, r)] * ex.as_expr(xi[r]) for r in range(n))
            out[(a, m)] = e
    return out


def komar_superpotential(problem: JetProblem, kappa: ex.Expr, xi) -> Dict[tuple, ex.Expr]:
    """(sqrt g / 2 kappa)(nabla^s xi^m - nabla^m xi^s) in the factor-free
    divergence convention of this engine (twice the half-sum convention)."""
    n = problem.n
    grad = covariant_vector_gradient(problem, xi)
    sq = problem.metric_sqrtdet()

    def raised(s, m):
        return ex.esum(problem.metric_inverse(s, a) * grad[(a, m)] for a in range(n))

    out = {}
    for s in range(n):
        for m in range(n):
            out[(s, m)] = (
                Fraction(1, 2) * sq * (raised(s, m) - raised(m, s)) * kappa ** -1
            )
    return out
