"""Formal (total) derivatives and horizontal-density calculus.

Density conventions, fixed once for the whole engine:

    w            = dx^1 ^ ... ^ dx^n            (volume)
    w_s          = del_s -| w                   ((n-1)-basis)
    w_{sm}       = del_m -| del_s -| w          ((n-2)-basis)

A top density is L w; an (n-1)-density is eps^s w_s with divergence
dH(eps) = (D_s eps^s) w; an (n-2)-density is an antisymmetric table
eta^{sm} with dH(eta)^s = D_m eta^{sm} (factor-free, full sum over m).
Literature that sums antisymmetric pairs once displays values half of ours.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Optional

from . import expr as ex
from .errors import DegreeError, DimensionMismatch, OrderOverflow
from .multiindex import MultiIndex

DEFAULT_ORDER_CAP = 6

# Formal derivatives of opaque calls recur constantly (metric inverses,
# sqrt-det); memoized globally since atoms are interned and the rules pure.
_D_OPAQUE: dict = {}


def _d_atom(atom: ex.Atom, sigma: int, cap: int) -> Optional[ex.Expr]:
    """D_sigma of a single atom; None encodes zero (for base coords off-axis)."""
    kind = atom.kind
    if kind == ex.FIELD_JET:
        field, comp, alpha = atom.data
        if sum(alpha) + 1 > cap:
            raise OrderOverflow(
                f"D_{sigma + 1} would push {atom!r} past the order cap {cap}"
            )
        shifted = tuple(
            c + 1 if i == sigma else c for i, c in enumerate(alpha)
        )
        return ex.atom_expr(ex.field_jet(field, comp, shifted))
    if kind == ex.PARAM_JET:
        space, index, alpha = atom.data
        if sum(alpha) + 1 > cap:
            raise OrderOverflow(
                f"D_{sigma + 1} would push {atom!r} past the order cap {cap}"
            )
        shifted = tuple(
            c + 1 if i == sigma else c for i, c in enumerate(alpha)
        )
        return ex.atom_expr(ex.param_jet(space, index, shifted))
    if kind == ex.BASE_COORD:
        return ex.ONE if atom.data == sigma else None
    # opaque call: chain rule through the registered slot partials
    key = (atom, sigma, cap)
    got = _D_OPAQUE.get(key)
    if got is None:
        func = ex.opaque_func(atom)
        args = ex.opaque_args(atom)
        total = ex.ZERO
        for k, arg in enumerate(args):
            darg = total_derivative(arg, sigma, cap)
            if darg.is_zero():
                continue
            rule = func.partials[k]
            if rule is None:
                from .errors import MissingPartial

                raise MissingPartial(f"{func.name} has no partial rule for slot {k}")
            total = total + rule(*args) * darg
        got = total
        _D_OPAQUE[key] = got
    return None if got.is_zero() else got


def total_derivative(e: ex.Expr, sigma: int, cap: int = DEFAULT_ORDER_CAP) -> ex.Expr:
    """Formal derivative D_sigma: del_sigma + y^j_{a+sigma} del_j^a, ... ."""
    e = ex.as_expr(e)
    acc: dict = {}
    get = acc.get
    for m, coeff in e.terms.items():
        for idx, (a, k) in enumerate(m):
            da = _d_atom(a, sigma, cap)
            if da is None:
                continue
            rest = m[:idx] + m[idx + 1:]
            if k != 1:
                rest = ex._mono_mul(rest, ((a, k - 1),))
            c = coeff * k
            if len(da.terms) == 1:
                (dm, dc), = da.terms.items()
                m2 = ex._mono_mul(rest, dm)
                c2 = c * dc
                v = get(m2)
                if v is None:
                    acc[m2] = c2
                else:
                    v = v + c2
                    if v:
                        acc[m2] = v
                    else:
                        del acc[m2]
            else:
                for dm, dc in da.terms.items():
                    m2 = ex._mono_mul(rest, dm)
                    c2 = c * dc
                    v = get(m2)
                    if v is None:
                        acc[m2] = c2
                    else:
                        v = v + c2
                        if v:
                            acc[m2] = v
                        else:
                            del acc[m2]
    return ex.Expr._from_accum(acc)


def total_derivative_multi(e: ex.Expr, alpha, cap: int = DEFAULT_ORDER_CAP) -> ex.Expr:
    """Iterated formal derivative D_alpha (directions applied in ascending order)."""
    out = ex.as_expr(e)
    for sigma, count in enumerate(alpha):
        for _ in range(count):
            out = total_derivative(out, sigma, cap)
    return out


class HorizontalDensity:
    """Horizontal p-density for p in {n-2, n-1, n}, stored componentwise."""

    def __init__(self, n: int, degree: int, data):
        if degree not in (n - 2, n - 1, n):
            raise DegreeError(f"degree {degree} unsupported for n={n}")
        self.n = n
        self.degree = degree
        if degree == n:
            self.data = ex.as_expr(data)
        elif degree == n - 1:
            comps = tuple(ex.as_expr(c) for c in data)
            if len(comps) != n:
                raise DimensionMismatch(f"need {n} components, got {len(comps)}")
            self.data = comps
        else:
            # data: mapping (s, m) -> Expr; both triangles accepted, the lower
            # one derived by antisymmetry; diagonal must vanish.
            table = [[ex.ZERO for _ in range(n)] for _ in range(n)]
            for (s, m), v in data.items():
                v = ex.as_expr(v)
                if s == m:
                    if not v.is_zero():
                        raise DimensionMismatch("diagonal (n-2) components must vanish")
                    continue
                table[s][m] = table[s][m] + v
                table[m][s] = table[m][s] - v
            self.data = tuple(tuple(row) for row in table)

    def component(self, *idx) -> ex.Expr:
        if self.degree == self.n:
            return self.data
        if self.degree == self.n - 1:
            return self.data[idx[0]]
        return self.data[idx[0]][idx[1]]

    def map(self, f) -> "HorizontalDensity":
        if self.degree == self.n:
            return HorizontalDensity(self.n, self.degree, f(self.data))
        if self.degree == self.n - 1:
            return HorizontalDensity(self.n, self.degree, tuple(f(c) for c in self.data))
        table = {
            (s, m): f(self.data[s][m])
            for s in range(self.n)
            for m in range(s + 1, self.n)
        }
        return HorizontalDensity(self.n, self.degree, table)

    def __add__(self, other):
        if self.degree != other.degree or self.n != other.n:
            raise DegreeError("density degrees differ")
        if self.degree == self.n:
            return HorizontalDensity(self.n, self.degree, self.data + other.data)
        if self.degree == self.n - 1:
            return HorizontalDensity(
                self.n, self.degree, tuple(a + b for a, b in zip(self.data, other.data))
            )
        table = {
            (s, m): self.data[s][m] + other.data[s][m]
            for s in range(self.n)
            for m in range(s + 1, self.n)
        }
        return HorizontalDensity(self.n, self.degree, table)

    def __sub__(self, other):
        return self + other.map(lambda e: -e)

    def is_zero(self) -> bool:
        if self.degree == self.n:
            return self.data.is_zero()
        if self.degree == self.n - 1:
            return all(c.is_zero() for c in self.data)
        return all(c.is_zero() for row in self.data for c in row)


def dH(d: HorizontalDensity, cap: int = DEFAULT_ORDER_CAP) -> HorizontalDensity:
    """Horizontal differential on densities: a total divergence per component."""
    n = d.n
    if d.degree == n:
        raise DegreeError("dH of a top-degree density is not defined")
    if d.degree == n - 1:
        top = ex.esum(total_derivative(d.data[s], s, cap) for s in range(n))
        return HorizontalDensity(n, n, top)
    comps = []
    for s in range(n):
        comps.append(
            ex.esum(total_derivative(d.data[s][m], m, cap) for m in range(n))
        )
    return HorizontalDensity(n, n - 1, tuple(comps))


def dV_fiber_partials(L: ex.Expr, problem=None) -> Dict[tuple, ex.Expr]:
    """All non-zero fiber partials dL/dy^i_alpha, keyed by (field, comp, alpha).

    Opaque calls with field atoms among their arguments contribute through
    their registered derivative rules, so a metric hidden inside sqrt-det or
    inverse entries is differentiated correctly.
    """
    out: Dict[tuple, ex.Expr] = {}
    seen = set()
    memo: dict = {}
    work = list(L.atoms())
    field_atoms = set()
    while work:
        a = work.pop()
        if a in seen:
            continue
        seen.add(a)
        if a.kind == ex.FIELD_JET:
            field_atoms.add(a)
        elif a.kind == ex.OPAQUE_CALL:
            for arg in ex.opaque_args(a):
                work.extend(arg.atoms())
    for a in field_atoms:
        p = ex.partial(L, a, _memo=memo)
        if not p.is_zero():
            out[a.data] = p
    return out
