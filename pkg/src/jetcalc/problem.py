"""Problem registry: base dimension, fields, symmetry parameters, backgrounds.

A `JetProblem` owns the bookkeeping every other module consults: which field
components exist, what geometric type they carry, the gauge algebra with its
structure constants, named scalar constants, and the opaque functions derived
from a metric field (inverse entries and the square root of the absolute
determinant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import DomainError, OrderOverflow, SemanticError, UnknownDescriptor
from .multiindex import MultiIndex


@dataclass(frozen=True)
class TensorDensity:
    """Tensor density type: p contravariant slots, q covariant, weight w."""

    contra: int = 0
    cov: int = 0
    weight: Fraction = Fraction(0)
    symmetric: bool = False

    def __post_init__(self):
        if self.contra < 0 or self.cov < 0:
            raise UnknownDescriptor("tensor valences must be non-negative")
        if self.symmetric and not (
            (self.contra, self.cov) in ((2, 0), (0, 2))
        ):
            raise UnknownDescriptor("symmetric storage only supported for rank-2 tensors")


@dataclass(frozen=True)
class PrincipalConnection:
    """Principal-connection type: components omega^A_mu, uses structure constants."""


class Field:
    """A declared field: label, geometric descriptor, component index set."""

    def __init__(self, label: str, descriptor, n: int, algebra_dim: int = 0):
        self.label = label
        self.descriptor = descriptor
        self.n = n
        if isinstance(descriptor, TensorDensity):
            if descriptor.symmetric:
                comps = [
                    (a, b) for a in range(n) for b in range(a, n)
                ]
            else:
                slots = descriptor.contra + descriptor.cov
                comps = _index_tuples(n, slots)
        elif isinstance(descriptor, PrincipalConnection):
            if algebra_dim == 0:
                raise UnknownDescriptor(
                    f"field {label}: a principal connection needs a gauge algebra"
                )
            comps = [(A, mu) for A in range(algebra_dim) for mu in range(n)]
        else:
            raise UnknownDescriptor(f"field {label}: unsupported descriptor {descriptor!r}")
        self.components: Tuple[tuple, ...] = tuple(comps)
        self._comp_set = set(comps)

    def canonical_comp(self, comp: tuple) -> tuple:
        comp = tuple(comp)
        if isinstance(self.descriptor, TensorDensity) and self.descriptor.symmetric:
            comp = tuple(sorted(comp))
        if comp not in self._comp_set:
            raise SemanticError(f"field {self.label}: no component {comp}")
        return comp


def _index_tuples(n: int, slots: int):
    if slots == 0:
        return [()]
    out = [()]
    for _ in range(slots):
        out = [t + (i,) for t in out for i in range(n)]
    return out


class JetProblem:
    """Declaration of the fibered setup a computation runs over."""

    def __init__(self, n: int, order: int = 6):
        if n < 1:
            raise ValueError("base dimension must be >= 1")
        if order < 1:
            raise ValueError("jet order cap must be >= 1")
        self.n = n
        self.order = order
        self.fields: Dict[str, Field] = {}
        self.algebra_labels: Tuple[str, ...] = ()
        self._structure: Dict[Tuple[int, int, int], Fraction] = {}
        self.constants: Dict[str, ex.Atom] = {}
        self.backgrounds: Dict[str, Dict[tuple, ex.Expr]] = {}
        self.metric_field: Optional[str] = None
        self._metric_inv: Dict[tuple, ex.Atom] = {}
        self._metric_sqrt: Optional[ex.Atom] = None
        self.opaque_functions: Dict[str, ex.OpaqueFunction] = {}

    # -- declarations -------------------------------------------------------

    def set_algebra(self, labels: Sequence[str], structure=None):
        """Declare the gauge algebra basis and structure constants c^A_{BC}.

        `structure` maps (A, B, C) index triples to rationals; omitted entries
        are zero.  Antisymmetry in (B, C) and the Jacobi identity are enforced
        exactly on the table.
        """
        if self.fields:
            for f in self.fields.values():
                if isinstance(f.descriptor, PrincipalConnection):
                    raise SemanticError("declare the algebra before connection fields")
        self.algebra_labels = tuple(labels)
        dim = len(self.algebra_labels)
        table: Dict[Tuple[int, int, int], Fraction] = {}
        for (A, B, C), v in (structure or {}).items():
            v = Fraction(v)
            if not all(0 <= i < dim for i in (A, B, C)):
                raise SemanticError(f"structure constant index {(A, B, C)} out of range")
            if v:
                table[(A, B, C)] = v
        # antisymmetrize-check: c^A_{BC} = -c^A_{CB}
        for (A, B, C), v in list(table.items()):
            w = table.get((A, C, B), Fraction(0))
            if w != -v:
                if (A, C, B) not in table and B != C:
                    table[(A, C, B)] = -v
                else:
                    raise SemanticError(
                        f"structure constants not antisymmetric at {(A, B, C)}"
                    )
            if B == C and v:
                raise SemanticError(f"c^{A}_{{{B}{C}}} must vanish for B == C")
        self._structure = table
        # Jacobi: sum over cyclic(BCD) of c^A_{BE} c^E_{CD} = 0, exact.
        for A in range(dim):
            for B in range(dim):
                for C in range(dim):
                    for D in range(dim):
                        s = Fraction(0)
                        for E in range(dim):
                            s += self.c(A, E, D) * self.c(E, B, C)
                            s += self.c(A, E, B) * self.c(E, C, D)
                            s += self.c(A, E, C) * self.c(E, D, B)
                        if s:
                            raise SemanticError(
                                f"structure constants violate the Jacobi identity "
                                f"at A={A}, (B,C,D)=({B},{C},{D})"
                            )

    def c(self, A: int, B: int, C: int) -> Fraction:
        return self._structure.get((A, B, C), Fraction(0))

    @property
    def algebra_dim(self) -> int:
        return len(self.algebra_labels)

    def add_field(self, label: str, descriptor, metric: bool = False) -> Field:
        if label in self.fields:
            raise SemanticError(f"field {label} already declared")
        f = Field(label, descriptor, self.n, self.algebra_dim)
        self.fields[label] = f
        if metric:
            self._register_metric(f)
        return f

    def add_constant(self, name: str) -> ex.Atom:
        """A named positive scalar constant; bound directly at sampling time."""
        if name in self.constants:
            return self.constants[name]
        fn = ex.OpaqueFunction(name, 0)
        self.opaque_functions[name] = fn
        atom = ex.opaque_call(fn, ())
        self.constants[name] = atom
        return atom

    def set_background(self, field: str, table: Dict[tuple, ex.Expr]):
        f = self.require_field(field)
        self.backgrounds[field] = {
            f.canonical_comp(c): ex.as_expr(v) for c, v in table.items()
        }

    # -- atom constructors ----------------------------------------------------

    def x(self, sigma: int) -> ex.Expr:
        if not 0 <= sigma < self.n:
            raise SemanticError(f"base direction {sigma} out of range")
        return ex.atom_expr(ex.base_coord(sigma))

    def jet(self, field: str, comp: tuple = (), alpha=None) -> ex.Expr:
        f = self.require_field(field)
        comp = f.canonical_comp(comp)
        mi = MultiIndex(alpha) if alpha is not None else MultiIndex.zero(self.n)
        if len(mi) != self.n:
            raise SemanticError(f"multi-index {mi} has wrong dimension")
        if mi.order > self.order:
            raise OrderOverflow(f"jet order {mi.order} exceeds the cap {self.order}")
        return ex.atom_expr(ex.field_jet(field, comp, mi))

    def y(self, field: str, comp: tuple = ()) -> ex.Expr:
        return self.jet(field, comp)

    def xi_base(self, mu: int, alpha=None) -> ex.Expr:
        if not 0 <= mu < self.n:
            raise SemanticError(f"base parameter index {mu} out of range")
        mi = MultiIndex(alpha) if alpha is not None else MultiIndex.zero(self.n)
        return ex.atom_expr(ex.param_jet("base", mu, mi))

    def xi_alg(self, A: int, alpha=None) -> ex.Expr:
        if not 0 <= A < self.algebra_dim:
            raise SemanticError(f"algebra parameter index {A} out of range")
        mi = MultiIndex(alpha) if alpha is not None else MultiIndex.zero(self.n)
        return ex.atom_expr(ex.param_jet("alg", A, mi))

    def constant(self, name: str) -> ex.Expr:
        if name not in self.constants:
            raise SemanticError(f"constant {name} not declared")
        return ex.atom_expr(self.constants[name])

    def require_field(self, label: str) -> Field:
        f = self.fields.get(label)
        if f is None:
            raise SemanticError(f"field {label} not declared")
        return f

    def registered_atoms(self) -> set:
        """All atoms this problem can legally construct (bounded by the cap)."""
        from .multiindex import multiindices_upto

        out = set()
        for s in range(self.n):
            out.add(ex.base_coord(s))
        for f in self.fields.values():
            for comp in f.components:
                for mi in multiindices_upto(self.n, self.order):
                    out.add(ex.field_jet(f.label, comp, mi))
        for mu in range(self.n):
            for mi in multiindices_upto(self.n, self.order):
                out.add(ex.param_jet("base", mu, mi))
        for A in range(self.algebra_dim):
            for mi in multiindices_upto(self.n, self.order):
                out.add(ex.param_jet("alg", A, mi))
        return out

    # -- metric machinery -------------------------------------------------------

    def _register_metric(self, f: Field):
        d = f.descriptor
        if not (isinstance(d, TensorDensity) and d.symmetric and (d.contra, d.cov) == (0, 2)):
            raise UnknownDescriptor(
                "a metric field must be a symmetric (0,2) tensor (covariant components)"
            )
        if self.metric_field is not None:
            raise SemanticError("only one metric field per problem is supported")
        self.metric_field = f.label
        n = self.n
        pairs = list(f.components)
        arg_atoms = [ex.field_jet(f.label, c, MultiIndex.zero(n)) for c in pairs]
        arg_exprs = [ex.atom_expr(a) for a in arg_atoms]
        pair_pos = {c: i for i, c in enumerate(pairs)}

        def as_matrix(vals):
            m = np.empty((n, n), dtype=float)
            for (a, b), i in pair_pos.items():
                m[a, b] = vals[i]
                m[b, a] = vals[i]
            return m

        def det_eval(vals):
            d = float(np.linalg.det(as_matrix(vals)))
            if abs(d) < 1e-12:
                raise DomainError("metric determinant vanished at the sample point")
            return d

        inv_fns: Dict[tuple, ex.OpaqueFunction] = {}
        inv_atoms: Dict[tuple, ex.Atom] = {}

        def inv_expr(a, b):
            return ex.atom_expr(inv_atoms[(min(a, b), max(a, b))])

        def make_inv_partial(entry, slot_pair):
            a, b = entry
            m_, n_ = slot_pair

            def rule(*args):
                if m_ == n_:
                    return -(inv_expr(a, m_) * inv_expr(m_, b))
                return -(inv_expr(a, m_) * inv_expr(n_, b) + inv_expr(a, n_) * inv_expr(m_, b))

            return rule

        def make_inv_eval(entry):
            a, b = entry

            def evaluator(vals):
                m = as_matrix(vals)
                if abs(np.linalg.det(m)) < 1e-12:
                    raise DomainError("metric not invertible at the sample point")
                return float(np.linalg.inv(m)[a, b])

            def cross(vals):
                # cofactor expansion, independent of np.linalg.inv
                m = as_matrix(vals)
                d = float(np.linalg.det(m))
                minor = np.delete(np.delete(m, b, axis=0), a, axis=1)
                cof = ((-1) ** (a + b)) * float(np.linalg.det(minor))
                return cof / d

            return evaluator, cross

        for entry in pairs:
            name = f"{f.label}.inv[{entry[0]},{entry[1]}]"
            evaluator, cross = make_inv_eval(entry)
            fn = ex.OpaqueFunction(
                name,
                len(pairs),
                partials=[make_inv_partial(entry, sp) for sp in pairs],
                evaluator=evaluator,
                cross_evaluator=cross,
            )
            inv_fns[entry] = fn
            self.opaque_functions[name] = fn

        for entry, fn in inv_fns.items():
            inv_atoms[entry] = ex.opaque_call(fn, arg_exprs)

        def sqrt_partial(slot_pair):
            m_, n_ = slot_pair

            def rule(*args):
                s = ex.atom_expr(self._metric_sqrt)
                w = Fraction(1, 2) if m_ == n_ else Fraction(1)
                return s * inv_expr(m_, n_) * w

            return rule

        def sqrt_eval(vals):
            return math.sqrt(abs(det_eval(vals)))

        def sqrt_cross(vals):
            # Leibniz expansion of the determinant, dimension-specific
            m = as_matrix(vals)
            import itertools as _it

            total = 0.0
            for perm in _it.permutations(range(n)):
                sign = 1
                seen = list(perm)
                for i in range(n):
                    for j in range(i + 1, n):
                        if seen[i] > seen[j]:
                            sign = -sign
                prod = 1.0
                for i in range(n):
                    prod *= m[i, perm[i]]
                total += sign * prod
            return math.sqrt(abs(total))

        sq = ex.OpaqueFunction(
            f"{f.label}.sqrtdet",
            len(pairs),
            partials=[sqrt_partial(sp) for sp in pairs],
            evaluator=sqrt_eval,
            cross_evaluator=sqrt_cross,
        )
        self.opaque_functions[sq.name] = sq
        self._metric_sqrt = ex.opaque_call(sq, arg_exprs)
        self._metric_inv = inv_atoms
        self._metric_pairs = pairs

    def metric_inverse(self, a: int, b: int) -> ex.Expr:
        """Inverse-metric entry g^{ab} as an opaque call."""
        if self.metric_field is None:
            raise SemanticError("no metric field declared")
        return ex.atom_expr(self._metric_inv[(min(a, b), max(a, b))])

    def metric_sqrtdet(self) -> ex.Expr:
        """sqrt|det g| of the metric field as an opaque call."""
        if self.metric_field is None:
            raise SemanticError("no metric field declared")
        return ex.atom_expr(self._metric_sqrt)
