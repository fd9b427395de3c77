"""Canonical symbolic expressions over jet-space atoms.

An expression is stored directly in polynomial normal form: a finite sum of
monomials, each monomial a product of integer powers of atoms with an exact
rational coefficient.  Because every constructor and operation returns this
form, `normalize` is the identity and equal polynomials are represented by
identical term dictionaries.

Atoms come in four kinds, totally ordered as

    BaseCoord < FieldJet < ParamJet < OpaqueCall

with ties broken lexicographically on the identifying data and graded-lex on
multi-indices.  Opaque calls (square roots of determinants, inverse-metric
entries, named constants) behave as independent symbols whose formal partial
derivatives are supplied by registered rules; no algebraic relation between
an opaque call and its arguments is assumed by the normal form.

Coefficients are `fractions.Fraction`; floating point enters only through
`evaluate`.  Negative powers are allowed on atom factors (needed for 1/kappa
and 1/sqrt-type derivative rules) but not on general sums.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import (
    DomainError,
    MissingPartial,
    NonInvertible,
    UnboundAtom,
)

Rational = Fraction

# Atom kind tags; numeric values define the canonical kind order.
BASE_COORD = 0
FIELD_JET = 1
PARAM_JET = 2
OPAQUE_CALL = 3

_KIND_NAMES = {
    BASE_COORD: "BaseCoord",
    FIELD_JET: "FieldJet",
    PARAM_JET: "ParamJet",
    OPAQUE_CALL: "OpaqueCall",
}


class OpaqueFunction:
    """A scalar function treated as an independent symbol with known partials.

    `partials[k]` builds the expression for the derivative with respect to
    argument slot k from the actual argument expressions; `None` marks a slot
    with no registered rule (differentiating through it raises
    MissingPartial).  `evaluator` maps a tuple of real arguments to a real
    value and may raise DomainError on its singular set.  `cross_evaluator`,
    when present, is an independent numeric implementation used by the test
    suite to cross-check `evaluator`.
    """

    __slots__ = ("name", "arity", "partials", "evaluator", "cross_evaluator")

    def __init__(
        self,
        name: str,
        arity: int,
        partials: Sequence[Optional[Callable[..., "Expr"]]] = (),
        evaluator: Optional[Callable[[tuple], float]] = None,
        cross_evaluator: Optional[Callable[[tuple], float]] = None,
    ):
        self.name = name
        self.arity = arity
        self.partials = tuple(partials) if partials else (None,) * arity
        if len(self.partials) != arity:
            raise ValueError(f"{name}: expected {arity} partial rules")
        self.evaluator = evaluator
        self.cross_evaluator = cross_evaluator

    def __repr__(self):
        return f"OpaqueFunction({self.name}/{self.arity})"


class Atom:
    """Interned symbol: base coordinate, field jet, parameter jet or opaque call."""

    __slots__ = ("kind", "data", "sort_key", "_hash")

    def __new__(cls, *a, **k):  # pragma: no cover - guard against direct use
        raise TypeError("use the atom constructors (base_coord, field_jet, ...)")

    @classmethod
    def _build(cls, kind, data, sort_key):
        self = object.__new__(cls)
        self.kind = kind
        self.data = data
        self.sort_key = sort_key
        self._hash = hash((kind, data))
        return self

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other  # interned

    def __lt__(self, other):
        return self.sort_key < other.sort_key

    @property
    def jet_order(self) -> int:
        """Total derivative order carried by the atom (0 for non-jets)."""
        if self.kind in (FIELD_JET, PARAM_JET):
            return sum(self.data[-1])
        return 0

    def __repr__(self):
        k = _KIND_NAMES[self.kind]
        return f"{k}{self.data!r}"


_ATOM_TABLE: dict = {}


def _intern(kind, data, sort_key) -> Atom:
    key = (kind, data)
    atom = _ATOM_TABLE.get(key)
    if atom is None:
        atom = Atom._build(kind, data, sort_key)
        _ATOM_TABLE[key] = atom
    return atom


def base_coord(sigma: int) -> Atom:
    """Coordinate x^sigma on the base (0-based index)."""
    if sigma < 0:
        raise ValueError("base coordinate index must be >= 0")
    return _intern(BASE_COORD, sigma, (BASE_COORD, sigma))


def field_jet(field: str, comp: tuple, alpha: tuple) -> Atom:
    """Jet coordinate of field component `comp` at multi-index `alpha`."""
    alpha = tuple(alpha)
    comp = tuple(comp)
    return _intern(FIELD_JET, (field, comp, alpha), (FIELD_JET, field, comp, (sum(alpha), alpha)))


def param_jet(space: str, index: int, alpha: tuple) -> Atom:
    """Jet of a symmetry parameter: space 'base' for xi^mu, 'alg' for xi^A."""
    if space not in ("base", "alg"):
        raise ValueError("parameter space must be 'base' or 'alg'")
    alpha = tuple(alpha)
    rank = 0 if space == "base" else 1
    return _intern(
        PARAM_JET,
        (space, index, alpha),
        (PARAM_JET, rank, index, (sum(alpha), alpha)),
    )


def opaque_call(func: OpaqueFunction, args: Sequence["Expr"] = ()) -> Atom:
    args = tuple(as_expr(a) for a in args)
    if len(args) != func.arity:
        raise ValueError(f"{func.name} expects {func.arity} arguments, got {len(args)}")
    arg_keys = tuple(a.key() for a in args)
    return _intern(
        OPAQUE_CALL,
        (func.name, arg_keys, func, args),
        (OPAQUE_CALL, func.name, arg_keys),
    )


def opaque_args(atom: Atom) -> tuple:
    return atom.data[3]


def opaque_func(atom: Atom) -> OpaqueFunction:
    return atom.data[2]


# A monomial is a tuple of (atom, exponent) pairs sorted by atom.sort_key,
# exponents nonzero.  The empty tuple is the constant monomial.
Mono = tuple

_EMPTY: Mono = ()
_MISSING = object()


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        fa, fb = a[i], b[j]
        ka, kb = fa[0].sort_key, fb[0].sort_key
        if ka == kb:
            e = fa[1] + fb[1]
            if e:
                out.append((fa[0], e))
            i += 1
            j += 1
        elif ka < kb:
            out.append(fa)
            i += 1
        else:
            out.append(fb)
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _mono_pow(m: Mono, k: int) -> Mono:
    return tuple((a, e * k) for a, e in m)


class Expr:
    """Immutable expression in canonical polynomial form."""

    __slots__ = ("terms", "_key")

    def __init__(self, terms: dict):
        # Callers hand over ownership of `terms`; zero coefficients removed.
        self.terms = terms
        self._key = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def _from_accum(acc: dict) -> "Expr":
        for m in [m for m, c in acc.items() if not c]:
            del acc[m]
        return Expr(acc)

    def key(self):
        """Hashable canonical key (used for interning opaque arguments)."""
        if self._key is None:
            items = sorted(
                ((tuple((a.sort_key, e) for a, e in m), c) for m, c in self.terms.items())
            )
            self._key = tuple(items)
        return self._key

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == ({} if other == 0 else {_EMPTY: Fraction(other)})
        return NotImplemented

    def __hash__(self):
        return hash(self.key())

    def constant_value(self) -> Optional[Fraction]:
        """The rational value if the expression is a constant, else None."""
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and _EMPTY in self.terms:
            return self.terms[_EMPTY]
        return None

    def atoms(self) -> set:
        out = set()
        for m in self.terms:
            for a, _ in m:
                out.add(a)
        return out

    def jet_order(self) -> int:
        order = 0
        for m in self.terms:
            for a, _ in m:
                o = a.jet_order
                if o > order:
                    order = o
        return order

    def __len__(self):
        return len(self.terms)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_expr(other)
        if not self.terms:
            return other
        if not other.terms:
            return self
        acc = dict(self.terms)
        for m, c in other.terms.items():
            v = acc.get(m)
            if v is None:
                acc[m] = c
            else:
                v = v + c
                if v:
                    acc[m] = v
                else:
                    del acc[m]
        return Expr(acc)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return ZERO
            if other == 1:
                return self
            q = Fraction(other)
            return Expr({m: c * q for m, c in self.terms.items()})
        other = as_expr(other)
        if not self.terms or not other.terms:
            return ZERO
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        acc: dict = {}
        get = acc.get
        for mb, cb in b.items():
            for ma, ca in a.items():
                m = _mono_mul(ma, mb)
                c = ca * cb
                v = get(m)
                if v is None:
                    acc[m] = c
                else:
                    v = v + c
                    if v:
                        acc[m] = v
                    else:
                        del acc[m]
        return Expr(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        other = as_expr(other)
        return self * other.reciprocal()

    def reciprocal(self) -> "Expr":
        """Inverse of a single-monomial expression; raises NonInvertible otherwise."""
        if len(self.terms) != 1:
            raise NonInvertible("only single-term expressions can be inverted")
        (m, c), = self.terms.items()
        return Expr({_mono_pow(m, -1): Fraction(1) / c})

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("exponent must be an integer")
        if k == 0:
            return ONE
        if k == 1:
            return self
        if k < 0:
            return self.reciprocal() ** (-k)
        # repeated squaring keeps intermediate collection cheap
        half = self ** (k // 2)
        out = half * half
        if k % 2:
            out = out * self
        return out

    # -- views ---------------------------------------------------------------

    def sorted_terms(self):
        """Terms in the canonical display order."""
        return sorted(
            self.terms.items(),
            key=lambda mc: tuple((a.sort_key, -e) for a, e in mc[0]),
        )

    def __repr__(self):
        from .render import plain

        return plain(self)


ZERO = Expr({})
ONE = Expr({_EMPTY: Fraction(1)})


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Atom):
        return Expr({((x, 1),): Fraction(1)})
    if isinstance(x, (int, Fraction)):
        q = Fraction(x)
        return Expr({_EMPTY: q}) if q else ZERO
    raise TypeError(f"cannot coerce {type(x).__name__} to Expr")


def const(p, q=None) -> Expr:
    return as_expr(Fraction(p, q) if q is not None else Fraction(p))


def atom_expr(a: Atom) -> Expr:
    return Expr({((a, 1),): Fraction(1)})


def esum(items: Iterable) -> Expr:
    """Sum of an iterable of expressions (single-pass accumulation)."""
    acc: dict = {}
    get = acc.get
    for it in items:
        e = as_expr(it)
        for m, c in e.terms.items():
            v = get(m)
            if v is None:
                acc[m] = c
            else:
                v = v + c
                if v:
                    acc[m] = v
                else:
                    del acc[m]
    return Expr(acc)


def normalize(e: Expr) -> Expr:
    """Canonical form; the representation is canonical already, so identity."""
    return as_expr(e)


# -- substitution -------------------------------------------------------------


def substitute(e: Expr, bindings: Mapping[Atom, object], known_atoms=None) -> Expr:
    """Simultaneous replacement of atoms by expressions, then renormalization.

    Opaque-call atoms whose arguments contain bound atoms are rebuilt with the
    substituted arguments.  When `known_atoms` is given, binding keys outside
    it raise UnknownAtom.
    """
    if known_atoms is not None:
        for a in bindings:
            if a not in known_atoms:
                raise UnknownAtom(f"binding key {a!r} is not registered")
    if not bindings:
        return e
    repl = {a: as_expr(v) for a, v in bindings.items()}

    cache: dict = {}
    rebuilt: dict = {}

    def rebuild_opaque(atom: Atom):
        got = rebuilt.get(atom, _MISSING)
        if got is _MISSING:
            args = opaque_args(atom)
            new_args = [substitute(arg, bindings) for arg in args]
            if any(na != oa for na, oa in zip(new_args, args)):
                got = atom_expr(opaque_call(opaque_func(atom), new_args))
            else:
                got = None
            rebuilt[atom] = got
        return got

    def factor_expr(atom: Atom, exp: int) -> Expr:
        got = repl.get(atom)
        if got is None and atom.kind == OPAQUE_CALL:
            got = rebuild_opaque(atom)
        if got is None:
            return Expr({((atom, exp),): Fraction(1)})
        c = cache.get((atom, exp))
        if c is None:
            c = got ** exp
            cache[(atom, exp)] = c
        return c

    acc: dict = {}
    get = acc.get
    for m, coeff in e.terms.items():
        if not any(a in repl or a.kind == OPAQUE_CALL for a, _ in m):
            v = get(m)
            acc[m] = coeff if v is None else v + coeff
            continue
        prod = None
        plain_factors = []
        for a, k in m:
            if a in repl or (a.kind == OPAQUE_CALL and a not in repl):
                fe = factor_expr(a, k)
                prod = fe if prod is None else prod * fe
            else:
                plain_factors.append((a, k))
        term = Expr({tuple(plain_factors): coeff})
        if prod is not None:
            term = term * prod
        for m2, c2 in term.terms.items():
            v = get(m2)
            if v is None:
                acc[m2] = c2
            else:
                v = v + c2
                if v:
                    acc[m2] = v
                else:
                    del acc[m2]
    return Expr._from_accum(acc)


# -- partial differentiation ---------------------------------------------------


def _opaque_partial(call_atom: Atom, wrt: Atom, memo: dict) -> Expr:
    """d(opaque call)/d(atom) via registered slot rules, chain rule on args."""
    got = memo.get((call_atom, wrt))
    if got is not None:
        return got
    func = opaque_func(call_atom)
    args = opaque_args(call_atom)
    total = ZERO
    for k, arg in enumerate(args):
        darg = partial(arg, wrt, _memo=memo)
        if darg.is_zero():
            continue
        rule = func.partials[k]
        if rule is None:
            raise MissingPartial(f"{func.name} has no partial rule for slot {k}")
        total = total + rule(*args) * darg
    memo[(call_atom, wrt)] = total
    return total


def partial(e: Expr, wrt: Atom, _memo=None) -> Expr:
    """Formal partial derivative treating distinct atoms as independent."""
    if _memo is None:
        _memo = {}
    acc: dict = {}
    get = acc.get
    for m, coeff in e.terms.items():
        for idx, (a, k) in enumerate(m):
            if a is wrt:
                rest = m[:idx] + m[idx + 1:]
                if k != 1:
                    rest = _mono_mul(rest, ((a, k - 1),))
                c = coeff * k
                v = get(rest)
                if v is None:
                    acc[rest] = c
                else:
                    v = v + c
                    if v:
                        acc[rest] = v
                    else:
                        del acc[rest]
            elif a.kind == OPAQUE_CALL:
                dcall = _opaque_partial(a, wrt, _memo)
                if dcall.is_zero():
                    continue
                rest = m[:idx] + m[idx + 1:]
                if k != 1:
                    rest = _mono_mul(rest, ((a, k - 1),))
                piece = Expr({rest: coeff * k}) * dcall
                for m2, c2 in piece.terms.items():
                    v = get(m2)
                    if v is None:
                        acc[m2] = c2
                    else:
                        v = v + c2
                        if v:
                            acc[m2] = v
                        else:
                            del acc[m2]
    return Expr._from_accum(acc)


# -- numeric evaluation ---------------------------------------------------------


def evaluate(e: Expr, point: Mapping[Atom, float], _cache=None) -> float:
    """Real evaluation; every atom must be bound or opaquely evaluable."""
    cache = _cache if _cache is not None else {}
    total = 0.0
    for m, coeff in e.terms.items():
        v = float(coeff)
        for a, k in m:
            v *= _atom_value(a, point, cache) ** k
        total += v
    return total


def _atom_value(a: Atom, point: Mapping[Atom, float], cache: dict) -> float:
    got = point.get(a)
    if got is not None:
        return got
    if a.kind == OPAQUE_CALL:
        got = cache.get(a)
        if got is None:
            func = opaque_func(a)
            if func.evaluator is None:
                raise UnboundAtom(f"opaque call {func.name} has no evaluator and no binding")
            argv = tuple(evaluate(arg, point, cache) for arg in opaque_args(a))
            got = func.evaluator(argv)
            cache[a] = got
        return got
    raise UnboundAtom(f"atom {a!r} is not bound")


def max_subterm_magnitude(e: Expr, point: Mapping[Atom, float], _cache=None) -> float:
    """Magnitude of the largest monomial; scale reference for residual checks."""
    cache = _cache if _cache is not None else {}
    best = 0.0
    for m, coeff in e.terms.items():
        v = abs(float(coeff))
        for a, k in m:
            v *= abs(_atom_value(a, point, cache)) ** k
        if v > best:
            best = v
    return best


def is_linear_in(e: Expr, pred) -> bool:
    """True when every monomial has total degree <= 1 in atoms satisfying pred."""
    for m in e.terms:
        deg = 0
        for a, k in m:
            if pred(a):
                deg += k
        if deg > 1 or deg < 0:
            return False
    return True
