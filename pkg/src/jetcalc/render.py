"""Expression rendering: plain text, LaTeX, and the structured round-trip form.

The structured form is the machine contract: `parse_expression` on its output
reproduces the expression exactly.  Plain and LaTeX are display-only.
"""

from __future__ import annotations

from fractions import Fraction

from . import expr as ex


def _comp_label(field: str, comp: tuple) -> str:
    if not comp:
        return field
    return field + "." + ".".join(str(i + 1) for i in comp)


def _atom_structured(a: ex.Atom, problem=None) -> str:
    if a.kind == ex.BASE_COORD:
        return f"x{a.data + 1}"
    if a.kind == ex.FIELD_JET:
        field, comp, alpha = a.data
        mi = ",".join(str(c) for c in alpha)
        return f"y[{_comp_label(field, comp)}; {mi}]"
    if a.kind == ex.PARAM_JET:
        space, index, alpha = a.data
        mi = ",".join(str(c) for c in alpha)
        if space == "base":
            label = f"b{index + 1}"
        else:
            label = f"a{index + 1}"
            if problem is not None and index < len(problem.algebra_labels):
                label = problem.algebra_labels[index]
        return f"xi[{label}; {mi}]"
    # opaque call
    func = ex.opaque_func(a)
    name = func.name
    if func.arity == 0:
        return name
    if ".inv[" in name or name.endswith(".sqrtdet"):
        # metric helpers have fixed argument lists; print compactly
        if name.endswith(".sqrtdet"):
            return f"sqrtdet({name[: -len('.sqrtdet')]})"
        base, rest = name.split(".inv[")
        i, j = rest[:-1].split(",")
        return f"inv({base};{int(i) + 1},{int(j) + 1})"
    args = ", ".join(structured(arg, problem) for arg in ex.opaque_args(a))
    return f"op({name}; {args})"


def _mono_structured(m, coeff: Fraction, problem=None) -> str:
    parts = []
    if not m:
        return str(coeff)
    if coeff == -1:
        parts.append("-1")
    elif coeff != 1:
        parts.append(str(coeff))
    for a, k in m:
        s = _atom_structured(a, problem)
        if k != 1:
            s += f"^{k}"
        parts.append(s)
    return "*".join(parts)


def structured(e, problem=None) -> str:
    e = ex.as_expr(e)
    if not e.terms:
        return "0"
    bits = []
    for m, c in e.sorted_terms():
        t = _mono_structured(m, c, problem)
        if bits and not t.startswith("-"):
            bits.append("+" + t)
        else:
            bits.append(t)
    return " ".join(bits)


# -- plain ---------------------------------------------------------------------


def _sub_indices(alpha) -> str:
    out = []
    for i, c in enumerate(alpha):
        out.extend([str(i + 1)] * c)
    return "".join(out)


def _atom_plain(a: ex.Atom, problem=None) -> str:
    if a.kind == ex.BASE_COORD:
        return f"x{a.data + 1}"
    if a.kind == ex.FIELD_JET:
        field, comp, alpha = a.data
        base = field if not comp else f"{field}[{','.join(str(i + 1) for i in comp)}]"
        if sum(alpha) == 0:
            return base
        return f"{base}_{{,{_sub_indices(alpha)}}}"
    if a.kind == ex.PARAM_JET:
        space, index, alpha = a.data
        if space == "base":
            base = f"xi^{index + 1}"
        else:
            label = str(index + 1)
            if problem is not None and index < len(problem.algebra_labels):
                label = problem.algebra_labels[index]
            base = f"xi^{label}"
        if sum(alpha) == 0:
            return base
        return f"{base}_{{,{_sub_indices(alpha)}}}"
    func = ex.opaque_func(a)
    if func.arity == 0:
        return func.name
    name = func.name
    if name.endswith(".sqrtdet"):
        return "sqrt|" + name[: -len(".sqrtdet")] + "|"
    if ".inv[" in name:
        base, rest = name.split(".inv[")
        i, j = rest[:-1].split(",")
        return f"{base}^[{int(i) + 1},{int(j) + 1}]"
    args = ",".join(plain(arg, problem) for arg in ex.opaque_args(a))
    return f"{name}({args})"


def plain(e, problem=None) -> str:
    e = ex.as_expr(e)
    if not e.terms:
        return "0"
    bits = []
    for m, c in e.sorted_terms():
        factors = []
        for a, k in m:
            s = _atom_plain(a, problem)
            if k != 1:
                s += f"^{k}"
            factors.append(s)
        sign = "-" if c < 0 else "+"
        c = abs(c)
        if not factors:
            body = str(c)
        elif c == 1:
            body = "*".join(factors)
        else:
            body = str(c) + "*" + "*".join(factors)
        bits.append((sign, body))
    first_sign, first_body = bits[0]
    out = ("-" if first_sign == "-" else "") + first_body
    for sign, body in bits[1:]:
        out += f" {sign} {body}"
    return out


# -- latex ---------------------------------------------------------------------


def _atom_latex(a: ex.Atom, problem=None) -> str:
    if a.kind == ex.BASE_COORD:
        return f"x^{{{a.data + 1}}}"
    if a.kind == ex.FIELD_JET:
        field, comp, alpha = a.data
        upper = "" if not comp else "{" + ",".join(str(i + 1) for i in comp) + "}"
        lower = _sub_indices(alpha)
        base = field
        if upper:
            base += f"_{upper}" if field != "w" else f"^{upper}"
        if lower:
            base += f"{{}}_{{,{lower}}}"
        return base
    if a.kind == ex.PARAM_JET:
        space, index, alpha = a.data
        if space == "base":
            base = f"\\xi^{{{index + 1}}}"
        else:
            label = str(index + 1)
            if problem is not None and index < len(problem.algebra_labels):
                label = problem.algebra_labels[index]
            base = f"\\xi^{{{label}}}"
        lower = _sub_indices(alpha)
        if lower:
            base += f"{{}}_{{,{lower}}}"
        return base
    func = ex.opaque_func(a)
    if func.arity == 0:
        return f"\\{func.name}" if func.name == "kappa" else func.name
    name = func.name
    if name.endswith(".sqrtdet"):
        return "\\sqrt{|" + name[: -len(".sqrtdet")] + "|}"
    if ".inv[" in name:
        base, rest = name.split(".inv[")
        i, j = rest[:-1].split(",")
        return f"{base}^{{{int(i) + 1}{int(j) + 1}}}"
    args = ",".join(latex(arg, problem) for arg in ex.opaque_args(a))
    return f"\\mathrm{{{name}}}({args})"


def _frac_latex(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    sign = "-" if c < 0 else ""
    return f"{sign}\\tfrac{{{abs(c.numerator)}}}{{{c.denominator}}}"


def latex(e, problem=None) -> str:
    e = ex.as_expr(e)
    if not e.terms:
        return "0"
    bits = []
    for m, c in e.sorted_terms():
        factors = []
        for a, k in m:
            s = _atom_latex(a, problem)
            if k != 1:
                s += f"^{{{k}}}"
            factors.append(s)
        sign = "-" if c < 0 else "+"
        c = abs(c)
        if not factors:
            body = _frac_latex(c)
        elif c == 1:
            body = "\\,".join(factors)
        else:
            body = _frac_latex(c) + "\\," + "\\,".join(factors)
        bits.append((sign, body))
    first_sign, first_body = bits[0]
    out = ("-" if first_sign == "-" else "") + first_body
    for sign, body in bits[1:]:
        out += f" {sign} {body}"
    return out
