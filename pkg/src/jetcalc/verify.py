"""Numeric verification backend: jet-point sampling, identity checks,
finite-difference oracles and on-shell substitution.

All sampling is driven by a single seeded generator, so reports are
reproducible bit-for-bit given (seed, expression, constraints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import ConstraintUnsatisfiable, DomainError
from .jets import total_derivative, total_derivative_multi
from .multiindex import MultiIndex
from .problem import JetProblem


# -- atom collection -------------------------------------------------------------


def bindable_atoms(exprs: Iterable[ex.Expr]) -> Tuple[set, set]:
    """Closure of atoms to bind: (direct atoms, arity-0 opaque atoms).

    Arguments of opaque calls are walked transitively so that a sampler binds
    the metric entries hiding inside sqrt-det and inverse calls.
    """
    direct = set()
    consts = set()
    seen = set()
    work = []
    for e in exprs:
        work.extend(ex.as_expr(e).atoms())
    while work:
        a = work.pop()
        if a in seen:
            continue
        seen.add(a)
        if a.kind == ex.OPAQUE_CALL:
            if ex.opaque_func(a).arity == 0:
                consts.add(a)
            else:
                for arg in ex.opaque_args(a):
                    work.extend(arg.atoms())
        else:
            direct.add(a)
    return direct, consts


@dataclass
class SampleConstraints:
    """Extra structure imposed on sampled points.

    fixed: exact bindings; antisymmetric_pairs: (a, b) with value(b) = -value(a);
    box: half-width of the uniform box for unconstrained atoms.
    """

    fixed: Dict[ex.Atom, float] = None
    antisymmetric_pairs: Sequence[Tuple[ex.Atom, ex.Atom]] = ()
    box: float = 1.0

    def __post_init__(self):
        if self.fixed is None:
            self.fixed = {}


def sample_jet_point(
    problem: JetProblem,
    seed: int,
    atoms: Iterable[ex.Atom] = None,
    constraints: Optional[SampleConstraints] = None,
    exprs: Iterable[ex.Expr] = None,
) -> Dict[ex.Atom, float]:
    """One deterministic jet point binding the requested atoms.

    Order-0 components of the metric field are drawn as diag(+-1) plus a
    symmetric perturbation of magnitude <= 0.3 and redrawn until
    |det| >= 0.1; everything else is uniform in the sampling box.  Named
    constants (arity-0 opaques) are positive in [1/2, 2].
    """
    if constraints is None:
        constraints = SampleConstraints()
    if atoms is None:
        atoms = set()
    else:
        atoms = set(atoms)
    if exprs is not None:
        direct, consts = bindable_atoms(exprs)
        atoms |= direct | consts
    rng = np.random.default_rng(seed)
    point: Dict[ex.Atom, float] = {}

    n = problem.n
    mf = problem.metric_field
    metric_pairs = []
    if mf is not None:
        metric_pairs = [
            ex.field_jet(mf, c, MultiIndex.zero(n)) for c in problem.fields[mf].components
        ]
    metric_set = set(metric_pairs)
    if mf is not None and metric_set & atoms:
        # metric order-0 entries must be jointly consistent
        for attempt in range(200):
            signs = rng.choice([-1.0, 1.0], size=n)
            m = np.diag(signs)
            pert = rng.uniform(-0.3, 0.3, size=(n, n))
            m = m + (pert + pert.T) / 2.0
            if abs(np.linalg.det(m)) >= 0.1:
                break
        else:
            raise ConstraintUnsatisfiable("could not sample an invertible metric")
        for c in problem.fields[mf].components:
            point[ex.field_jet(mf, c, MultiIndex.zero(n))] = float(m[c[0], c[1]])

    antis = {}
    for a, b in constraints.antisymmetric_pairs:
        antis[b] = a

    box = constraints.box
    for a in sorted(atoms, key=lambda t: t.sort_key):
        if a in point:
            continue
        if a in constraints.fixed:
            point[a] = float(constraints.fixed[a])
            continue
        if a in antis:
            continue  # filled from the partner below
        if a.kind == ex.OPAQUE_CALL:
            point[a] = float(rng.uniform(0.5, 2.0))  # named positive constant
        else:
            point[a] = float(rng.uniform(-box, box))
    for b, a in antis.items():
        if a not in point:
            point[a] = float(rng.uniform(-box, box))
        point[b] = -point[a]
    return point


# -- identity verification --------------------------------------------------------


@dataclass
class VerificationReport:
    identity: str
    samples: int
    max_abs_residual: float
    max_rel_residual: float
    tolerance: float
    passed: bool
    seed: int

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] {self.identity}: samples={self.samples} "
            f"max_abs={self.max_abs_residual:.3e} max_rel={self.max_rel_residual:.3e} "
            f"tol={self.tolerance:.1e} seed={self.seed}"
        )


def evaluate_batch(e: ex.Expr, points: List[dict]) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluation over a batch of points.

    Returns (values, scales) where scales is the per-point magnitude of the
    largest monomial, the denominator reference for relative residuals.
    """
    S = len(points)
    vals = np.zeros(S)
    scales = np.zeros(S)
    caches = [dict() for _ in range(S)]
    atom_vec: Dict[ex.Atom, np.ndarray] = {}

    def vec(a: ex.Atom) -> np.ndarray:
        v = atom_vec.get(a)
        if v is None:
            v = np.array(
                [ex._atom_value(a, points[i], caches[i]) for i in range(S)]
            )
            atom_vec[a] = v
        return v

    for m, coeff in e.terms.items():
        term = np.full(S, float(coeff))
        for a, k in m:
            av = vec(a)
            if k == 1:
                term = term * av
            elif k == -1:
                term = term / av
            else:
                term = term * av ** k
        vals += term
        np.maximum(scales, np.abs(term), out=scales)
    return vals, scales


def verify_identity(
    target,
    problem: JetProblem,
    samples: int = 50,
    tol: float = 1e-8,
    seed: int = 0,
    identity: str = "identity",
    constraints: Optional[SampleConstraints] = None,
) -> VerificationReport:
    """Check that an expression (or a family of components) vanishes numerically.

    A canonical zero short-circuits with residual 0.  The relative residual
    divides by one plus the largest monomial magnitude, so cancellation-heavy
    identities are judged against the scale of what cancels.
    """
    comps = [ex.as_expr(c) for c in (target if isinstance(target, (list, tuple)) else [target])]
    comps = [c for c in comps if not c.is_zero()]
    if not comps:
        return VerificationReport(identity, samples, 0.0, 0.0, tol, True, seed)
    points = [
        sample_jet_point(problem, seed + 7919 * i, constraints=constraints, exprs=comps)
        for i in range(samples)
    ]
    max_abs = 0.0
    max_rel = 0.0
    for c in comps:
        vals, scales = evaluate_batch(c, points)
        absr = np.abs(vals)
        rel = absr / (1.0 + scales)
        max_abs = max(max_abs, float(absr.max()))
        max_rel = max(max_rel, float(rel.max()))
    return VerificationReport(
        identity, samples, max_abs, max_rel, tol, bool(max_rel <= tol), seed
    )


# -- finite differences -------------------------------------------------------------


def section_jets(
    problem: JetProblem, section: Dict[tuple, ex.Expr], x: Sequence[float], upto: int
) -> Dict[ex.Atom, float]:
    """Bindings for all jets of polynomial section components at base point x."""
    point = {ex.base_coord(s): float(x[s]) for s in range(problem.n)}
    base_point = dict(point)
    for (f, comp), e in section.items():
        for alpha in _mis(problem.n, upto):
            de = total_derivative_multi(ex.as_expr(e), alpha, cap=upto + problem.order)
            point[ex.field_jet(f, comp, alpha)] = ex.evaluate(de, base_point)
    return point


def _mis(n, upto):
    from .multiindex import multiindices_upto

    return list(multiindices_upto(n, upto))


def finite_difference_check(
    e: ex.Expr,
    sigma: int,
    problem: JetProblem,
    section: Dict[tuple, ex.Expr],
    x: Sequence[float],
    tol: float = 1e-5,
    step: float = 1e-4,
    identity: str = "finite-difference",
) -> VerificationReport:
    """Compare D_sigma(e) along a section with a Richardson-extrapolated
    central difference of e along the same section."""
    e = ex.as_expr(e)
    upto = e.jet_order() + 1
    de = total_derivative(e, sigma, cap=problem.order + 1)

    def value(shift: float) -> float:
        xs = list(x)
        xs[sigma] += shift
        return ex.evaluate(e, section_jets(problem, section, xs, upto))

    def central(h: float) -> float:
        return (value(h) - value(-h)) / (2 * h)

    fd = (4.0 * central(step / 2) - central(step)) / 3.0
    symbolic = ex.evaluate(de, section_jets(problem, section, list(x), upto))
    resid = abs(symbolic - fd)
    rel = resid / (1.0 + max(abs(symbolic), abs(fd)))
    return VerificationReport(identity, 1, resid, rel, tol, bool(rel <= tol), 0)


# -- on-shell sampling -----------------------------------------------------------------


def on_shell_point(
    lag,
    targets: Sequence[ex.Expr],
    seed: int,
    el: Optional[dict] = None,
) -> Dict[ex.Atom, float]:
    """Sample a jet point consistent with the field equations.

    The leading (graded-lex greatest) jet atom of each Euler-Lagrange
    component, and of as many formal derivatives of it as the targets reach,
    is solved for linearly after all the other atoms are drawn at random.
    Raises ConstraintUnsatisfiable when a designated atom enters nonlinearly
    or with vanishing coefficient.
    """
    from .calculus import euler_lagrange

    problem = lag.problem
    cap = problem.order
    if el is None:
        el = euler_lagrange(lag)
    equations = []  # (order, expr)
    needed = set()
    target_atoms = set()
    for t in targets:
        ta, tc = bindable_atoms([ex.as_expr(t)])
        target_atoms |= ta | tc
        needed |= {a for a in ta if a.kind == ex.FIELD_JET}
    max_target_order = max((sum(a.data[2]) for a in needed), default=0)
    for key, e in el.items():
        if e.is_zero():
            continue
        base_order = e.jet_order()
        equations.append((base_order, e))
        for k in range(1, max(0, max_target_order - base_order) + 1):
            for alpha in _mis(problem.n, k):
                if alpha.order == k:
                    equations.append(
                        (base_order + k, total_derivative_multi(e, alpha, cap))
                    )
    equations.sort(key=lambda t: t[0])

    solved: Dict[ex.Atom, float] = {}
    eq_atoms = set()
    for _, e in equations:
        ea, ec = bindable_atoms([e])
        eq_atoms |= ea | ec
    point = sample_jet_point(problem, seed, atoms=eq_atoms | target_atoms)

    for _, eq in equations:
        jet_atoms = sorted(
            (a for a in eq.atoms() if a.kind == ex.FIELD_JET and a not in solved),
            key=lambda a: a.sort_key,
        )
        if not jet_atoms:
            continue
        lead = jet_atoms[-1]
        coeff = ex.partial(eq, lead)
        if lead in coeff.atoms():
            raise ConstraintUnsatisfiable(
                f"field equation nonlinear in designated atom {lead!r}"
            )
        cval = ex.evaluate(coeff, point)
        if abs(cval) < 1e-9:
            raise ConstraintUnsatisfiable("vanishing leading coefficient on-shell")
        rest = dict(point)
        rest[lead] = 0.0
        rval = ex.evaluate(eq, rest)
        point[lead] = -rval / cval
        solved[lead] = point[lead]
    return point
