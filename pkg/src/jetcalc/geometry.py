"""Symmetry generators, prolongations, gauge-natural lifts and Lie derivatives.

A generator is stored componentwise: base components xi^mu and algebra
components xi^A.  In symbolic mode the components are parameter-jet atoms
(or expressions linear in them), so everything downstream stays manifestly
linear in the generator; in explicit mode they are concrete functions of the
base coordinates.

Lifts to configuration fields are supplied per geometric descriptor:

  * tensor density (p, q, w):
        Xhat(T)^{a..}_{b..} = sum_k T^{..r..}_{b..} D_r xi^{a_k}
                              - sum_l T^{a..}_{..r..} D_{b_l} xi^r
                              - w T^{a..}_{b..} D_r xi^r
  * principal connection:
        Xhat(om)^A_m = D_m xi^A + c^A_{BC} om^B_m xi^C - om^A_n D_m xi^n

and the generalized Lie derivative of a field component is
xi^s y^i_s - Xhat^i.  The connection sign is pinned by the vertical case
(Lie derivative = -(D_m xi^A_v + c^A_{BC} om^B_m xi^C_v)) and re-checked by
the lift functoriality test.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from . import expr as ex
from .errors import ModeError, SemanticError, UnknownDescriptor
from .jets import total_derivative, total_derivative_multi
from .multiindex import MultiIndex, mi_multinomial, multiindices_upto, subindices
from .problem import JetProblem, PrincipalConnection, TensorDensity


class Generator:
    """Right-invariant infinitesimal automorphism in component form."""

    def __init__(self, problem: JetProblem, base: Sequence, alg: Sequence = ()):
        self.problem = problem
        self.base = tuple(ex.as_expr(b) for b in base)
        self.alg = tuple(ex.as_expr(a) for a in alg)
        if len(self.base) != problem.n:
            raise SemanticError(f"generator needs {problem.n} base components")
        if len(self.alg) != problem.algebra_dim:
            raise SemanticError(
                f"generator needs {problem.algebra_dim} algebra components"
            )

    @classmethod
    def generic(cls, problem: JetProblem) -> "Generator":
        """Fully symbolic generator: every component an independent parameter."""
        return cls(
            problem,
            [problem.xi_base(mu) for mu in range(problem.n)],
            [problem.xi_alg(A) for A in range(problem.algebra_dim)],
        )

    @classmethod
    def base_symbolic(cls, problem: JetProblem) -> "Generator":
        """Symbolic base components, vanishing algebra components."""
        return cls(
            problem,
            [problem.xi_base(mu) for mu in range(problem.n)],
            [ex.ZERO] * problem.algebra_dim,
        )

    @classmethod
    def vertical_symbolic(cls, problem: JetProblem) -> "Generator":
        """Pure gauge generator: zero base part, symbolic algebra components."""
        return cls(
            problem,
            [ex.ZERO] * problem.n,
            [problem.xi_alg(A) for A in range(problem.algebra_dim)],
        )

    @classmethod
    def zero(cls, problem: JetProblem) -> "Generator":
        return cls(problem, [ex.ZERO] * problem.n, [ex.ZERO] * problem.algebra_dim)

    def is_symbolic(self) -> bool:
        for c in self.base + self.alg:
            for a in c.atoms():
                if a.kind == ex.PARAM_JET:
                    return True
        return False

    def __add__(self, other: "Generator") -> "Generator":
        return Generator(
            self.problem,
            [a + b for a, b in zip(self.base, other.base)],
            [a + b for a, b in zip(self.alg, other.alg)],
        )

    def __sub__(self, other: "Generator") -> "Generator":
        return Generator(
            self.problem,
            [a - b for a, b in zip(self.base, other.base)],
            [a - b for a, b in zip(self.alg, other.alg)],
        )

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.base + self.alg)


@dataclass
class SplitGenerator:
    """Connection-induced horizontal/vertical decomposition of a generator."""

    horizontal: Generator
    vertical: Generator

    def recomposition(self, original: Generator) -> Generator:
        return (self.horizontal + self.vertical) - original


def split(gen: Generator, omega: Dict[tuple, ex.Expr]) -> SplitGenerator:
    """Split by a principal connection with component table omega[(A, mu)]."""
    problem = gen.problem
    xi_h_alg = []
    for A in range(problem.algebra_dim):
        xi_h_alg.append(
            ex.esum(
                ex.as_expr(omega.get((A, mu), ex.ZERO)) * gen.base[mu]
                for mu in range(problem.n)
            )
        )
    horizontal = Generator(problem, gen.base, xi_h_alg)
    vertical = Generator(
        problem,
        [ex.ZERO] * problem.n,
        [gen.alg[A] - xi_h_alg[A] for A in range(problem.algebra_dim)],
    )
    return SplitGenerator(horizontal, vertical)


# -- lifts and Lie derivatives ---------------------------------------------------


def lift(problem: JetProblem, field_label: str, gen: Generator) -> Dict[tuple, ex.Expr]:
    """Gauge-natural lift components Xhat^i for every component of the field."""
    f = problem.require_field(field_label)
    cap = problem.order
    d = f.descriptor
    n = problem.n
    dxi = [
        [total_derivative(gen.base[a], s, cap) for s in range(n)]
        for a in range(n)
    ]  # dxi[a][s] = D_s xi^a
    div_xi = ex.esum(dxi[r][r] for r in range(n))
    out: Dict[tuple, ex.Expr] = {}
    if isinstance(d, TensorDensity):
        p, q = d.contra, d.cov
        for comp in f.components:
            upper = comp[:p]
            lower = comp[p:]
            pieces = []
            for k in range(p):
                for r in range(n):
                    swapped = upper[:k] + (r,) + upper[k + 1:] + lower
                    pieces.append(problem.y(field_label, swapped) * dxi[upper[k]][r])
            for l in range(q):
                for r in range(n):
                    swapped = upper + lower[:l] + (r,) + lower[l + 1:]
                    pieces.append(-problem.y(field_label, swapped) * dxi[r][lower[l]])
            total = ex.esum(pieces)
            if d.weight:
                total = total - d.weight * problem.y(field_label, comp) * div_xi
            out[comp] = total
        return out
    if isinstance(d, PrincipalConnection):
        dim = problem.algebra_dim
        dxiA = [
            [total_derivative(gen.alg[A], s, cap) for s in range(n)]
            for A in range(dim)
        ]
        for (A, mu) in f.components:
            total = dxiA[A][mu]
            for B in range(dim):
                for C in range(dim):
                    cval = problem.c(A, B, C)
                    if cval:
                        total = total + cval * problem.y(field_label, (B, mu)) * gen.alg[C]
            for nu in range(n):
                total = total - problem.y(field_label, (A, nu)) * dxi[nu][mu]
            out[(A, mu)] = total
        return out
    raise UnknownDescriptor(f"no lift rule for descriptor {d!r}")


def lie_derivative(
    problem: JetProblem, field_label: str, gen: Generator, lifted=None
) -> Dict[tuple, ex.Expr]:
    """Generalized Lie derivative per component: xi^s y^i_s - Xhat^i."""
    f = problem.require_field(field_label)
    if lifted is None:
        lifted = lift(problem, field_label, gen)
    n = problem.n
    out = {}
    for comp in f.components:
        transport = ex.esum(
            gen.base[s] * problem.jet(field_label, comp, MultiIndex.unit(s, n))
            for s in range(n)
        )
        out[comp] = transport - lifted[comp]
    return out


def lie_derivatives(problem: JetProblem, gen: Generator) -> Dict[str, Dict[tuple, ex.Expr]]:
    return {label: lie_derivative(problem, label, gen) for label in problem.fields}


# -- projectable vector fields and prolongation ------------------------------------


class ProjectableVectorField:
    """Vector field xi^s(x) d_s + Xi^i(x, y) d_i projecting onto the base."""

    def __init__(self, problem: JetProblem, xi: Sequence, Xi: Dict[tuple, ex.Expr]):
        self.problem = problem
        self.xi = tuple(ex.as_expr(c) for c in xi)
        if len(self.xi) != problem.n:
            raise SemanticError(f"need {problem.n} base components")
        for c in self.xi:
            for a in c.atoms():
                if a.kind == ex.FIELD_JET:
                    raise SemanticError("base components must not involve fiber atoms")
        self.Xi = {}
        for label, f in problem.fields.items():
            for comp in f.components:
                e = ex.as_expr(Xi.get((label, comp), ex.ZERO))
                for a in e.atoms():
                    if a.kind == ex.FIELD_JET and sum(a.data[2]) > 0:
                        raise SemanticError(
                            "fiber components must depend on order-0 jets only"
                        )
                self.Xi[(label, comp)] = e


def prolong(vf: ProjectableVectorField, r: int) -> Dict[tuple, ex.Expr]:
    """Prolongation coefficients Xi^i_alpha for all |alpha| <= r (recursive).

    Recursion: Xi^i_{alpha+s} = D_s Xi^i_alpha - sum_m y^i_{alpha+m} D_s xi^m,
    seeded at alpha = 0 with the fiber components themselves.
    """
    problem = vf.problem
    n, cap = problem.n, problem.order
    dxi = [[total_derivative(vf.xi[m], s, cap) for s in range(n)] for m in range(n)]
    out: Dict[tuple, ex.Expr] = {}
    for (label, comp), e in vf.Xi.items():
        out[(label, comp, MultiIndex.zero(n))] = e
    for k in range(1, r + 1):
        for alpha in multiindices_upto(n, k):
            if alpha.order != k:
                continue
            s = alpha.support()[0]
            prev = alpha.drop(s)
            for (label, comp) in vf.Xi:
                base = total_derivative(out[(label, comp, prev)], s, cap)
                corr = ex.esum(
                    problem.jet(label, comp, prev.bump(m)) * dxi[m][s]
                    for m in range(n)
                )
                out[(label, comp, alpha)] = base - corr
    return out


def prolong_closed(vf: ProjectableVectorField, r: int) -> Dict[tuple, ex.Expr]:
    """Prolongation via the closed multinomial formula (cross-check route).

    Xi^i_alpha = D_alpha Xi^i
                 - sum_{beta+gamma=alpha, beta != 0} alpha!/(beta! gamma!)
                   D_beta xi^m y^i_{gamma+m}
    """
    problem = vf.problem
    n, cap = problem.n, problem.order
    out: Dict[tuple, ex.Expr] = {}
    dbeta_xi: Dict[tuple, ex.Expr] = {}
    for alpha in multiindices_upto(n, r):
        for m in range(n):
            dbeta_xi[(m, alpha)] = total_derivative_multi(vf.xi[m], alpha, cap)
    for (label, comp), e in vf.Xi.items():
        for alpha in multiindices_upto(n, r):
            total = total_derivative_multi(e, alpha, cap)
            for beta in subindices(alpha):
                if beta.order == 0:
                    continue
                gamma = alpha.sub(beta)
                coeff = mi_multinomial(alpha, beta, gamma)
                for m in range(n):
                    db = dbeta_xi[(m, beta)]
                    if db.is_zero():
                        continue
                    total = total - coeff * db * problem.jet(label, comp, gamma.bump(m))
            out[(label, comp, alpha)] = total
    return out


# -- brackets -----------------------------------------------------------------------


def _check_explicit(gen: Generator):
    if gen.is_symbolic():
        raise ModeError("operation requires explicit (non-symbolic) components")


def bracket(g1: Generator, g2: Generator) -> Generator:
    """Componentwise bracket of right-invariant generators (explicit mode).

    Base part: usual Lie bracket of base vector fields.  Algebra part:
    xi1^m d_m xi2^A - xi2^m d_m xi1^A + c^A_{BC} xi1^B xi2^C.
    """
    _check_explicit(g1)
    _check_explicit(g2)
    problem = g1.problem
    n = problem.n

    def directional(gen, e):
        return ex.esum(
            gen.base[m] * ex.partial(e, ex.base_coord(m)) for m in range(n)
        )

    base = [
        directional(g1, g2.base[s]) - directional(g2, g1.base[s]) for s in range(n)
    ]
    alg = []
    for A in range(problem.algebra_dim):
        e = directional(g1, g2.alg[A]) - directional(g2, g1.alg[A])
        for B in range(problem.algebra_dim):
            for C in range(problem.algebra_dim):
                cval = problem.c(A, B, C)
                if cval:
                    e = e + cval * g1.alg[B] * g2.alg[C]
        alg.append(e)
    return Generator(problem, base, alg)


def field_bracket(
    problem: JetProblem,
    v1: Tuple[Sequence, Dict[tuple, ex.Expr]],
    v2: Tuple[Sequence, Dict[tuple, ex.Expr]],
) -> Tuple[list, Dict[tuple, ex.Expr]]:
    """Bracket of two projectable vector fields on the total space.

    Components are pairs (xi list, Xi dict keyed by (field, comp)); entries may
    depend on base coordinates and order-0 fiber atoms.
    """
    xi1, Xi1 = v1
    xi2, Xi2 = v2

    def apply(xi, Xi, e):
        out = ex.esum(
            ex.as_expr(xi[m]) * ex.partial(e, ex.base_coord(m))
            for m in range(problem.n)
        )
        pieces = [out]
        for (label, comp), comp_e in Xi.items():
            a = ex.field_jet(label, comp, MultiIndex.zero(problem.n))
            pe = ex.partial(e, a)
            if not pe.is_zero():
                pieces.append(ex.as_expr(comp_e) * pe)
        return ex.esum(pieces)

    base = [
        apply(xi1, Xi1, ex.as_expr(xi2[s])) - apply(xi2, Xi2, ex.as_expr(xi1[s]))
        for s in range(problem.n)
    ]
    Xi = {}
    keys = set(Xi1) | set(Xi2)
    for key in keys:
        Xi[key] = apply(xi1, Xi1, ex.as_expr(Xi2.get(key, ex.ZERO))) - apply(
            xi2, Xi2, ex.as_expr(Xi1.get(key, ex.ZERO))
        )
    return base, Xi
