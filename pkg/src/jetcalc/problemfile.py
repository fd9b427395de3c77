"""Line-oriented problem files: parsing, diagnostics, and expression grammar.

A problem file declares the jet problem, the Lagrangian density (with local
`name(args) := expr` definitions), named symmetry generators, an optional
connection table, and a list of verification requests.  Expressions use a
small infix grammar:

    y[g.1.1; 0,1,0,0]      jet atom (structured form, multi-index counts)
    g[1,1]  w[T1,2]  u     order-0 component references
    D(2, expr)             formal derivative along direction 2
    sum(a, 1, n, expr)     finite sum binding index variable a
    select(a; e1, .., en)  index-dependent choice
    xi[b1]  xi[T1; 1,0]    symmetry-parameter jets
    inv(g; a, b)           inverse-metric entry       sqrtdet(g)
    op(name; args)         generic registered opaque call
    kappa                  declared named constant

Errors carry line and column positions; unknown labels raise SemanticError
naming the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dfield
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import expr as ex
from .errors import ParseError, SemanticError
from .geometry import Generator
from .jets import total_derivative
from .multiindex import MultiIndex
from .problem import JetProblem, PrincipalConnection, TensorDensity

# -- tokens ---------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9.]*)|(?P<op>:=|==|[-+*/^()\[\];,=<>])|(?P<bad>\S))"
)


@dataclass
class Token:
    kind: str  # 'num' | 'name' | 'op' | 'end'
    text: str
    line: int
    col: int


def tokenize(text: str, line: int, col0: int = 0) -> List[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            break
        if m.group("bad"):
            raise ParseError(
                f"unexpected character {m.group('bad')!r}",
                line=line,
                column=col0 + m.start("bad") + 1,
            )
        for kind in ("num", "name", "op"):
            if m.group(kind):
                out.append(Token(kind, m.group(kind), line, col0 + m.start(kind) + 1))
                break
        pos = m.end()
    out.append(Token("end", "", line, col0 + len(text) + 1))
    return out


class TokenStream:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "end":
            self.i += 1
        return t

    def expect(self, text: str, expected=None) -> Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(
                f"found {t.text!r}" if t.kind != "end" else "unexpected end of line",
                line=t.line,
                column=t.col,
                expected=expected or [repr(text)],
            )
        return self.next()

    def at_end(self) -> bool:
        return self.peek().kind == "end"


# -- expression AST ----------------------------------------------------------------


@dataclass
class Node:
    kind: str
    data: tuple
    line: int
    col: int


def _parse_expr(ts: TokenStream) -> Node:
    node = _parse_term(ts)
    while ts.peek().text in ("+", "-"):
        op = ts.next()
        rhs = _parse_term(ts)
        node = Node("bin", (op.text, node, rhs), op.line, op.col)
    return node


def _parse_term(ts: TokenStream) -> Node:
    node = _parse_unary(ts)
    while ts.peek().text in ("*", "/"):
        op = ts.next()
        rhs = _parse_unary(ts)
        node = Node("bin", (op.text, node, rhs), op.line, op.col)
    return node


def _parse_unary(ts: TokenStream) -> Node:
    t = ts.peek()
    if t.text in ("-", "+"):
        ts.next()
        inner = _parse_unary(ts)
        return Node("neg" if t.text == "-" else "pos", (inner,), t.line, t.col)
    return _parse_power(ts)


def _parse_power(ts: TokenStream) -> Node:
    base = _parse_primary(ts)
    if ts.peek().text == "^":
        op = ts.next()
        sign = 1
        t = ts.peek()
        if t.text == "-":
            ts.next()
            sign = -1
        t = ts.peek()
        if t.kind != "num":
            raise ParseError(
                "exponent must be an integer literal",
                line=t.line,
                column=t.col,
                expected=["integer"],
            )
        ts.next()
        return Node("pow", (base, sign * int(t.text)), op.line, op.col)
    return base


def _parse_index_list(ts: TokenStream, closer: str) -> List[Node]:
    out = []
    if ts.peek().text == closer:
        return out
    while True:
        out.append(_parse_expr(ts))
        if ts.peek().text == ",":
            ts.next()
            continue
        break
    return out


def _parse_primary(ts: TokenStream) -> Node:
    t = ts.peek()
    if t.kind == "num":
        ts.next()
        return Node("num", (int(t.text),), t.line, t.col)
    if t.text == "(":
        ts.next()
        inner = _parse_expr(ts)
        ts.expect(")")
        return inner
    if t.kind != "name":
        raise ParseError(
            f"found {t.text!r}" if t.kind != "end" else "unexpected end of line",
            line=t.line,
            column=t.col,
            expected=["number", "name", "'('"],
        )
    ts.next()
    name = t.text
    nxt = ts.peek()
    if nxt.text == "(":
        ts.next()
        if name in ("D",):
            direction = _parse_expr(ts)
            ts.expect(",")
            body = _parse_expr(ts)
            ts.expect(")")
            return Node("D", (direction, body), t.line, t.col)
        if name == "sum":
            var = ts.next()
            if var.kind != "name":
                raise ParseError("sum needs an index variable", line=var.line, column=var.col)
            ts.expect(",")
            lo = _parse_expr(ts)
            ts.expect(",")
            hi = _parse_expr(ts)
            ts.expect(",")
            body = _parse_expr(ts)
            ts.expect(")")
            return Node("sum", (var.text, lo, hi, body), t.line, t.col)
        if name == "select":
            idx = _parse_expr(ts)
            ts.expect(";")
            choices = _parse_index_list(ts, ")")
            ts.expect(")")
            return Node("select", (idx, choices), t.line, t.col)
        if name in ("inv", "sqrtdet", "op"):
            fld = ts.next()
            if fld.kind != "name":
                raise ParseError(f"{name} needs a name", line=fld.line, column=fld.col)
            args = []
            if ts.peek().text == ";":
                ts.next()
                args = _parse_index_list(ts, ")")
            ts.expect(")")
            return Node(name, (fld.text, args), t.line, t.col)
        args = _parse_index_list(ts, ")")
        ts.expect(")")
        return Node("call", (name, args), t.line, t.col)
    if nxt.text == "[":
        ts.next()
        if name == "y":
            comp = ts.next()
            if comp.kind != "name":
                raise ParseError("y[...] needs a component label", line=comp.line, column=comp.col)
            ts.expect(";")
            counts = _parse_index_list(ts, "]")
            ts.expect("]")
            return Node("yjet", (comp.text, counts), t.line, t.col)
        if name == "xi":
            label = ts.next()
            if label.kind != "name":
                raise ParseError("xi[...] needs a parameter label", line=label.line, column=label.col)
            counts = []
            if ts.peek().text == ";":
                ts.next()
                counts = _parse_index_list(ts, "]")
            ts.expect("]")
            return Node("xijet", (label.text, counts), t.line, t.col)
        idxs = _parse_index_list(ts, "]")
        ts.expect("]")
        return Node("compref", (name, idxs), t.line, t.col)
    return Node("name", (name,), t.line, t.col)


# -- AST evaluation -----------------------------------------------------------------


@dataclass
class Macro:
    params: Tuple[str, ...]
    body: Node


class ExprContext:
    """Evaluation environment: problem, macros, bound index variables."""

    def __init__(self, problem: JetProblem, macros: Optional[Dict[str, Macro]] = None):
        self.problem = problem
        self.macros = macros if macros is not None else {}
        self.alg_index = {lbl: i for i, lbl in enumerate(problem.algebra_labels)}

    def evaluate(self, node: Node, env: Optional[dict] = None) -> ex.Expr:
        return self._eval(node, env or {})

    # index evaluation: small integer results for slots and bounds
    def _eval_index(self, node: Node, env: dict) -> int:
        if node.kind == "num":
            return node.data[0]
        if node.kind == "name":
            name = node.data[0]
            if name in env:
                v = env[name]
                if isinstance(v, int):
                    return v
            if name == "n":
                return self.problem.n
            if name in self.alg_index:
                return self.alg_index[name] + 1
            raise SemanticError(
                f"unknown index {name!r}", line=node.line, column=node.col
            )
        if node.kind == "bin":
            op, a, b = node.data
            av, bv = self._eval_index(a, env), self._eval_index(b, env)
            if op == "+":
                return av + bv
            if op == "-":
                return av - bv
            if op == "*":
                return av * bv
        if node.kind == "neg":
            return -self._eval_index(node.data[0], env)
        raise SemanticError(
            "expected an index expression", line=node.line, column=node.col
        )

    def _field_comp(self, name: str, idxs, env, line, col):
        f = self.problem.fields.get(name)
        if f is None:
            raise SemanticError(f"undeclared field {name!r}", line=line, column=col)
        comp = []
        for k, ix in enumerate(idxs):
            if (
                isinstance(f.descriptor, PrincipalConnection)
                and k == 0
                and ix.kind == "name"
                and ix.data[0] in self.alg_index
                and ix.data[0] not in env
            ):
                comp.append(self.alg_index[ix.data[0]])
            else:
                comp.append(self._eval_index(ix, env) - 1)
        return f.canonical_comp(tuple(comp))

    def _eval(self, node: Node, env: dict) -> ex.Expr:
        kind = node.kind
        if kind == "num":
            return ex.const(node.data[0])
        if kind == "neg":
            return -self._eval(node.data[0], env)
        if kind == "pos":
            return self._eval(node.data[0], env)
        if kind == "bin":
            op, a, b = node.data
            av = self._eval(a, env)
            bv = self._eval(b, env)
            if op == "+":
                return av + bv
            if op == "-":
                return av - bv
            if op == "*":
                return av * bv
            if op == "/":
                try:
                    return av / bv
                except Exception as e:
                    raise SemanticError(
                        f"division requires an invertible denominator: {e}",
                        line=node.line,
                        column=node.col,
                    )
        if kind == "pow":
            base, k = node.data
            try:
                return self._eval(base, env) ** k
            except Exception as e:
                raise SemanticError(str(e), line=node.line, column=node.col)
        if kind == "D":
            direction, body = node.data
            s = self._eval_index(direction, env) - 1
            if not 0 <= s < self.problem.n:
                raise SemanticError(
                    f"derivative direction {s + 1} out of range",
                    line=node.line,
                    column=node.col,
                )
            return total_derivative(self._eval(body, env), s, self.problem.order)
        if kind == "sum":
            var, lo, hi, body = node.data
            lo_v = self._eval_index(lo, env)
            hi_v = self._eval_index(hi, env)
            pieces = []
            for v in range(lo_v, hi_v + 1):
                env2 = dict(env)
                env2[var] = v
                pieces.append(self._eval(body, env2))
            return ex.esum(pieces)
        if kind == "select":
            idx, choices = node.data
            v = self._eval_index(idx, env)
            if not 1 <= v <= len(choices):
                raise SemanticError(
                    f"select index {v} out of range", line=node.line, column=node.col
                )
            return self._eval(choices[v - 1], env)
        if kind == "inv":
            fld, args = node.data
            if self.problem.metric_field != fld:
                raise SemanticError(
                    f"{fld!r} is not the metric field", line=node.line, column=node.col
                )
            if len(args) != 2:
                raise SemanticError("inv needs two indices", line=node.line, column=node.col)
            a = self._eval_index(args[0], env) - 1
            b = self._eval_index(args[1], env) - 1
            return self.problem.metric_inverse(a, b)
        if kind == "sqrtdet":
            fld, args = node.data
            if self.problem.metric_field != fld:
                raise SemanticError(
                    f"{fld!r} is not the metric field", line=node.line, column=node.col
                )
            return self.problem.metric_sqrtdet()
        if kind == "op":
            name, args = node.data
            fn = self.problem.opaque_functions.get(name)
            if fn is None:
                raise SemanticError(
                    f"unknown opaque function {name!r}", line=node.line, column=node.col
                )
            return ex.atom_expr(
                ex.opaque_call(fn, [self._eval(a, env) for a in args])
            )
        if kind == "yjet":
            label, counts = node.data
            fname, comp = self._split_complabel(label, node)
            mi = tuple(self._eval_index(c, env) for c in counts)
            if len(mi) != self.problem.n:
                raise SemanticError(
                    f"multi-index needs {self.problem.n} entries",
                    line=node.line,
                    column=node.col,
                )
            return self.problem.jet(fname, comp, mi)
        if kind == "xijet":
            label, counts = node.data
            mi = tuple(self._eval_index(c, env) for c in counts) if counts else (0,) * self.problem.n
            if len(mi) != self.problem.n:
                raise SemanticError(
                    f"multi-index needs {self.problem.n} entries",
                    line=node.line,
                    column=node.col,
                )
            if label in self.alg_index:
                return self.problem.xi_alg(self.alg_index[label], mi)
            m = re.fullmatch(r"[ba](\d+)", label)
            if m:
                idx = int(m.group(1)) - 1
                if label[0] == "b":
                    return self.problem.xi_base(idx, mi)
                return self.problem.xi_alg(idx, mi)
            raise SemanticError(
                f"unknown parameter label {label!r}", line=node.line, column=node.col
            )
        if kind == "compref":
            name, idxs = node.data
            comp = self._field_comp(name, idxs, env, node.line, node.col)
            return self.problem.y(name, comp)
        if kind == "call":
            name, args = node.data
            macro = self.macros.get(name)
            if macro is None:
                raise SemanticError(
                    f"unknown function {name!r}", line=node.line, column=node.col
                )
            if len(args) != len(macro.params):
                raise SemanticError(
                    f"{name} expects {len(macro.params)} arguments, got {len(args)}",
                    line=node.line,
                    column=node.col,
                )
            env2 = dict(env)
            for p, a in zip(macro.params, args):
                env2[p] = self._eval_index(a, env)
            return self._eval(macro.body, env2)
        if kind == "name":
            name = node.data[0]
            if name in env and isinstance(env[name], int):
                return ex.const(env[name])
            if name in self.problem.constants:
                return self.problem.constant(name)
            f = self.problem.fields.get(name)
            if f is not None:
                if f.components == ((),):
                    return self.problem.y(name, ())
                raise SemanticError(
                    f"field {name!r} needs component indices", line=node.line, column=node.col
                )
            macro = self.macros.get(name)
            if macro is not None and not macro.params:
                return self._eval(macro.body, env)
            raise SemanticError(
                f"unknown name {name!r}", line=node.line, column=node.col
            )
        raise ParseError("malformed expression", line=node.line, column=node.col)

    def _split_complabel(self, label: str, node: Node):
        parts = label.split(".")
        fname = parts[0]
        f = self.problem.fields.get(fname)
        if f is None:
            raise SemanticError(
                f"undeclared field {parts[0]!r}", line=node.line, column=node.col
            )
        comp = []
        for p in parts[1:]:
            if p in self.alg_index:
                comp.append(self.alg_index[p])
            else:
                try:
                    comp.append(int(p) - 1)
                except ValueError:
                    raise SemanticError(
                        f"bad component index {p!r}", line=node.line, column=node.col
                    )
        return fname, f.canonical_comp(tuple(comp))


def parse_expression(text: str, ctx: ExprContext, line: int = 1, env=None) -> ex.Expr:
    ts = TokenStream(tokenize(text, line))
    node = _parse_expr(ts)
    t = ts.peek()
    if t.kind != "end":
        raise ParseError(
            f"trailing input {t.text!r}", line=t.line, column=t.col, expected=["end of line"]
        )
    return ctx.evaluate(node, env)


# -- problem files ----------------------------------------------------------------


@dataclass
class CheckRequest:
    kind: str
    options: Dict[str, str]
    expect: Optional[Tuple[Tuple[str, ...], Node]] = None  # (index vars, body)
    line: int = 0


@dataclass
class ProblemFile:
    problem: JetProblem
    lagrangian: ex.Expr
    generators: Dict[str, Generator]
    connection: Optional[Dict[tuple, ex.Expr]]
    checks: List[CheckRequest]
    context: ExprContext
    name: str = "problem"


_SECTIONS = ("problem", "fields", "algebra", "lagrangian", "generators", "connection", "checks")


def parse_problem(text: str, name: str = "problem") -> ProblemFile:
    """Parse a problem file into a validated ProblemFile."""
    sections: Dict[str, List[Tuple[int, str]]] = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith("["):
            stripped = line.strip()
            if not stripped.endswith("]"):
                raise ParseError(
                    "unterminated section header",
                    line=ln,
                    column=len(line) + 1,
                    expected=["']'"],
                )
            sec = stripped[1:-1].strip()
            if sec not in _SECTIONS:
                raise ParseError(
                    f"unknown section {sec!r}",
                    line=ln,
                    column=line.index("[") + 2,
                    expected=list(_SECTIONS),
                )
            current = sec
            sections.setdefault(sec, [])
            continue
        if current is None:
            raise ParseError(
                "content before the first section header", line=ln, column=1,
                expected=["'[problem]'"],
            )
        sections[current].append((ln, line.strip()))

    if "problem" not in sections:
        raise ParseError("missing [problem] section", line=1, column=1)

    # [problem]
    n = order = None
    constants: List[str] = []
    for ln, line in sections["problem"]:
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "n":
            n = int(val)
        elif key == "order":
            order = int(val)
        elif key == "constants":
            constants = [c.strip() for c in val.split(",") if c.strip()]
        else:
            raise ParseError(f"unknown problem key {key!r}", line=ln, column=1)
    if n is None:
        raise ParseError("the [problem] section must define n", line=1, column=1)
    problem = JetProblem(n=n, order=order if order is not None else 6)
    for cname in constants:
        problem.add_constant(cname)

    # [algebra] before fields so connections can resolve the dimension
    if "algebra" in sections:
        basis: List[str] = []
        structure = {}
        struct_lines = []
        for ln, line in sections["algebra"]:
            if line.startswith("basis"):
                _, _, val = line.partition("=")
                basis = [b.strip() for b in val.split(",") if b.strip()]
            elif line.startswith("c["):
                struct_lines.append((ln, line))
            else:
                raise ParseError(f"unknown algebra entry", line=ln, column=1,
                                 expected=["basis", "c[...]"])
        lbl_idx = {b: i for i, b in enumerate(basis)}

        def alg_ix(tok, ln):
            tok = tok.strip()
            if tok in lbl_idx:
                return lbl_idx[tok]
            try:
                return int(tok) - 1
            except ValueError:
                raise SemanticError(f"unknown basis label {tok!r}", line=ln)

        for ln, line in struct_lines:
            m = re.fullmatch(r"c\[([^;]+);([^,]+),([^\]]+)\]\s*=\s*(.+)", line)
            if not m:
                raise ParseError(
                    "structure constants use c[A; B, C] = value", line=ln, column=1
                )
            A, B, C = (alg_ix(m.group(i), ln) for i in (1, 2, 3))
            v = Fraction(m.group(4).strip())
            structure[(A, B, C)] = v
        problem.set_algebra(basis, structure)

    # [fields]
    if "fields" not in sections or not sections["fields"]:
        raise ParseError("missing [fields] section", line=1, column=1)
    for ln, line in sections["fields"]:
        fname, _, spec = line.partition(":")
        fname, spec = fname.strip(), spec.strip()
        if not fname or not spec:
            raise ParseError("field lines use name: kind", line=ln, column=1)
        if spec == "scalar":
            problem.add_field(fname, TensorDensity())
        elif spec == "metric":
            problem.add_field(
                fname, TensorDensity(cov=2, symmetric=True), metric=True
            )
        elif spec == "connection":
            problem.add_field(fname, PrincipalConnection())
        elif spec.startswith("tensor"):
            m = re.fullmatch(r"tensor\(([^)]*)\)", spec)
            if not m:
                raise ParseError("malformed tensor descriptor", line=ln, column=1)
            kw = {"contra": 0, "cov": 0, "weight": Fraction(0)}
            symmetric = False
            for part in m.group(1).split(","):
                part = part.strip()
                if not part:
                    continue
                if part == "symmetric":
                    symmetric = True
                    continue
                k, _, v = part.partition("=")
                k = k.strip()
                if k in ("contra", "cov"):
                    kw[k] = int(v)
                elif k == "weight":
                    kw[k] = Fraction(v.strip())
                else:
                    raise ParseError(f"unknown tensor option {k!r}", line=ln, column=1)
            problem.add_field(
                fname,
                TensorDensity(kw["contra"], kw["cov"], kw["weight"], symmetric),
            )
        else:
            raise ParseError(
                f"unknown field kind {spec!r}", line=ln, column=1,
                expected=["scalar", "metric", "connection", "tensor(...)"],
            )

    macros: Dict[str, Macro] = {}
    ctx = ExprContext(problem, macros)

    # [lagrangian]
    if "lagrangian" not in sections:
        raise ParseError("missing [lagrangian] section", line=1, column=1)
    L = None
    for ln, line in sections["lagrangian"]:
        if ":=" in line:
            head, _, body = line.partition(":=")
            m = re.fullmatch(r"\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\(([^)]*)\))?\s*", head)
            if not m:
                raise ParseError("definitions use name(params) := expr", line=ln, column=1)
            mname = m.group(1)
            params = tuple(
                p.strip() for p in (m.group(2) or "").split(",") if p.strip()
            )
            ts = TokenStream(tokenize(body, ln))
            node = _parse_expr(ts)
            if not ts.at_end():
                t = ts.peek()
                raise ParseError(f"trailing input {t.text!r}", line=ln, column=t.col)
            macros[mname] = Macro(params, node)
        elif line.startswith("L"):
            _, _, body = line.partition("=")
            L = parse_expression(body, ctx, line=ln)
        else:
            raise ParseError(
                "lagrangian lines are definitions or L = expr", line=ln, column=1,
                expected=["name(...) := expr", "L = expr"],
            )
    if L is None:
        raise ParseError("the [lagrangian] section must define L", line=1, column=1)

    # [generators]
    generators: Dict[str, Generator] = {}
    for ln, line in sections.get("generators", []):
        gname, _, spec = line.partition(":")
        gname, spec = gname.strip(), spec.strip()
        if spec == "generic":
            generators[gname] = Generator.generic(problem)
        elif spec == "base":
            generators[gname] = Generator.base_symbolic(problem)
        elif spec == "vertical":
            generators[gname] = Generator.vertical_symbolic(problem)
        elif spec == "zero":
            generators[gname] = Generator.zero(problem)
        elif spec.startswith("explicit"):
            m = re.fullmatch(
                r"explicit\s+base\s*=\s*\(([^)]*)\)(?:\s+alg\s*=\s*\(([^)]*)\))?", spec
            )
            if not m:
                raise ParseError(
                    "explicit generators use: explicit base=(e1, ...) [alg=(...)]",
                    line=ln,
                    column=1,
                )
            base = [
                parse_expression(s, ctx, line=ln) for s in _split_args(m.group(1))
            ]
            alg = [
                parse_expression(s, ctx, line=ln) for s in _split_args(m.group(2) or "")
            ]
            if len(base) != problem.n:
                raise SemanticError(
                    f"explicit generator needs {problem.n} base components", line=ln
                )
            if not alg:
                alg = [ex.ZERO] * problem.algebra_dim
            generators[gname] = Generator(problem, base, alg)
        else:
            raise ParseError(
                f"unknown generator kind {spec!r}", line=ln, column=1,
                expected=["generic", "base", "vertical", "zero", "explicit ..."],
            )

    # [connection]
    connection = None
    for ln, line in sections.get("connection", []):
        if line.startswith("field"):
            fname = line.split(None, 1)[1].strip()
            f = problem.require_field(fname)
            if not isinstance(f.descriptor, PrincipalConnection):
                raise SemanticError(f"{fname!r} is not a connection field", line=ln)
            connection = {
                comp: problem.y(fname, comp) for comp in f.components
            }
        else:
            m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)\[([^\]]+)\]\s*=\s*(.+)", line)
            if not m:
                raise ParseError(
                    "connection lines: field w | w[A,mu] = expr", line=ln, column=1
                )
            fname = m.group(1)
            f = problem.require_field(fname)
            idxs = [s.strip() for s in m.group(2).split(",")]
            alg_ix = {lbl: i for i, lbl in enumerate(problem.algebra_labels)}
            A = alg_ix.get(idxs[0], None)
            if A is None:
                A = int(idxs[0]) - 1
            mu = int(idxs[1]) - 1
            if connection is None:
                connection = {}
            connection[(A, mu)] = parse_expression(m.group(3), ctx, line=ln)

    # [checks]
    checks: List[CheckRequest] = []
    for ln, line in sections.get("checks", []):
        m = re.match(r"([a-z_]+)", line)
        if not m:
            raise ParseError("check lines start with a check kind", line=ln, column=1)
        kind = m.group(1)
        rest = line[m.end():]
        expect = None
        em = re.search(r"expect\s*(?:\(([^)]*)\))?\s*=\s*(.+)$", rest)
        if em:
            vars_ = tuple(v.strip() for v in (em.group(1) or "").split(",") if v.strip())
            ts = TokenStream(tokenize(em.group(2), ln))
            node = _parse_expr(ts)
            if not ts.at_end():
                t = ts.peek()
                raise ParseError(f"trailing input {t.text!r}", line=ln, column=t.col)
            expect = (vars_, node)
            rest = rest[: em.start()]
        options = {}
        for om in re.finditer(r"([a-z_]+)\s*=\s*([^\s]+)", rest):
            options[om.group(1)] = om.group(2)
        checks.append(CheckRequest(kind, options, expect, ln))

    return ProblemFile(
        problem=problem,
        lagrangian=L,
        generators=generators,
        connection=connection,
        checks=checks,
        context=ctx,
        name=name,
    )


def _split_args(s: str) -> List[str]:
    """Split a comma list at depth zero (respecting brackets)."""
    out, depth, cur = [], 0, []
    for ch in s:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return [o.strip() for o in out if o.strip()]
