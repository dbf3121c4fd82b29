"""Deterministic emitters: plain-text (parseable), LaTeX, and JSON."""

from __future__ import annotations

import json
from fractions import Fraction

from .ncalg import Atom, B0Node, DmNode, Expr
from .scalars import Scalar


# ---------------------------------------------------------------------------
# plain text (round-trips through parser.parse_expr)
# ---------------------------------------------------------------------------


def _frac_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _scalar_text(c: Scalar) -> tuple[str, str]:
    """Return (sign, body) with body possibly empty for +/-1."""
    parts = c.parts
    if len(parts) == 1:
        n, re, im = parts[0]
        if im == 0 or re == 0:
            val = re if im == 0 else im
            sign = "-" if val < 0 else "+"
            pieces = []
            if abs(val) != 1 or (im == 0 and n == 0):
                pieces.append(_frac_text(abs(val)))
            if im != 0:
                pieces.append("i")
            if n:
                pieces.append("pi" if n == 1 else f"pi^{n}")
            if not pieces:
                pieces.append("1")
            return sign, " ".join(pieces)
    # general case: parenthesized exact sum
    chunks = []
    for n, re, im in parts:
        for val, unit in ((re, ""), (im, " i")):
            if val == 0:
                continue
            body = _frac_text(abs(val)) + unit + ("" if n == 0 else
                                                  (" pi" if n == 1 else f" pi^{n}"))
            chunks.append(("-" if val < 0 else "+", body))
    text = chunks[0][0].replace("+", "") + chunks[0][1]
    for sign, body in chunks[1:]:
        text += f" {sign} {body}"
    return "+", f"({text})"


def _atom_text(a: Atom) -> str:
    if a.base == "k":
        core = "k" if a.kexp == 1 else f"k^{a.kexp}"
    else:
        core = "e"
        if a.twist == 1:
            core = "s(e)"
        elif a.twist == 2:
            core = "D(e)"
        elif a.twist:
            core = f"s^{a.twist}(e)"
    for d in reversed(a.deltas):
        core = f"d{d}({core})"
    return core


def _factor_text(f) -> str:
    if isinstance(f, Atom):
        return _atom_text(f)
    if isinstance(f, DmNode):
        inner = " ".join(_factor_text(g) for g in f.arg_word) or "1"
        return f"Dm[{f.m}]({inner})"
    if isinstance(f, B0Node):
        tag = f.tag or "b0"
        return f"{tag}^{f.power}" if f.power != 1 else tag
    raise TypeError(f"unknown factor {f!r}")


def emit_text(expr: Expr) -> str:
    """Deterministic text form; parseable when no resolvent factors remain."""
    if expr.is_zero():
        return "0"
    pieces = []
    for word, coef in expr.items():
        sign, body = _scalar_text(coef)
        factors = " ".join(_factor_text(f) for f in word)
        if factors and body:
            term = f"{body} {factors}"
        else:
            term = factors or body or "1"
        pieces.append((sign, term))
    text = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, term in pieces[1:]:
        text += f" {sign} {term}"
    return text


# ---------------------------------------------------------------------------
# LaTeX
# ---------------------------------------------------------------------------


def _frac_latex(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    s = "-" if q < 0 else ""
    return f"{s}\\frac{{{abs(q.numerator)}}}{{{q.denominator}}}"


def _scalar_latex(c: Scalar) -> tuple[str, str]:
    parts = c.parts
    if len(parts) == 1:
        n, re, im = parts[0]
        if im == 0 or re == 0:
            val = re if im == 0 else im
            sign = "-" if val < 0 else "+"
            pieces = []
            if abs(val) != 1 or (im == 0 and n == 0):
                pieces.append(_frac_latex(abs(val)))
            if im != 0:
                pieces.append("i")
            if n == 1:
                pieces.append("\\pi")
            elif n:
                pieces.append(f"\\pi^{{{n}}}")
            if not pieces:
                pieces.append("1")
            return sign, "".join(pieces)
    sign, body = _scalar_text(c)
    return sign, f"\\left({body}\\right)"


def _deltas_latex(deltas) -> str:
    out = ""
    for d in (1, 2):
        p = deltas.count(d)
        if p == 1:
            out += f"\\delta_{d}"
        elif p > 1:
            out += f"\\delta_{d}^{{{p}}}"
    return out


def _atom_latex(a: Atom) -> str:
    if a.base == "k":
        core = "k" if a.kexp == 1 else f"k^{{{a.kexp}}}"
    else:
        core = {0: "e", 1: "\\sigma(e)", 2: "\\Delta(e)"}.get(
            a.twist, f"\\sigma^{{{a.twist}}}(e)")
    if a.deltas:
        return f"{_deltas_latex(a.deltas)}({core})"
    return core


def _factor_latex(f) -> str:
    if isinstance(f, Atom):
        return _atom_latex(f)
    if isinstance(f, DmNode):
        inner = "".join(_factor_latex(g) for g in f.arg_word) or "1"
        return f"D_{{{f.m}}}\\left({inner}\\right)"
    if isinstance(f, B0Node):
        return "b_0" if f.power == 1 else f"b_0^{{{f.power}}}"
    raise TypeError(f"unknown factor {f!r}")


def emit_latex(expr: Expr) -> str:
    if expr.is_zero():
        return "0"
    pieces = []
    for word, coef in expr.items():
        sign, body = _scalar_latex(coef)
        factors = "".join(_factor_latex(f) for f in word)
        pieces.append((sign, (body + factors) if factors else (body or "1")))
    text = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, term in pieces[1:]:
        text += f"{sign}{term}"
    return text


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _coef_json(c: Scalar):
    return [
        {
            "pi_pow": n,
            "re_num": re.numerator, "re_den": re.denominator,
            "im_num": im.numerator, "im_den": im.denominator,
        }
        for n, re, im in c.parts
    ]


def _factor_json(f):
    if isinstance(f, Atom):
        return {"t": "atom", "base": f.base, "kexp": f.kexp,
                "deltas": list(f.deltas), "twist": f.twist}
    if isinstance(f, DmNode):
        return {"t": "dm", "m": f.m, "word": [_factor_json(g) for g in f.arg_word]}
    if isinstance(f, B0Node):
        return {"t": "b0", "tag": f.tag, "power": f.power,
                "lam_minus_one": f.lam_minus_one,
                "fcoef_num": f.fcoef.numerator, "fcoef_den": f.fcoef.denominator,
                "fword": [_factor_json(a) for a in f.fword]}
    raise TypeError(f"unknown factor {f!r}")


def expr_to_json(expr: Expr) -> str:
    data = {"terms": [{"coef": _coef_json(c),
                       "word": [_factor_json(f) for f in w]}
                      for w, c in expr.items()]}
    return json.dumps(data, indent=1, sort_keys=True)


def _factor_from_json(d):
    if d["t"] == "atom":
        return Atom(d["base"], kexp=d["kexp"], deltas=tuple(d["deltas"]),
                    twist=d["twist"])
    if d["t"] == "dm":
        return DmNode(d["m"], [_factor_from_json(g) for g in d["word"]])
    if d["t"] == "b0":
        return B0Node([_factor_from_json(a) for a in d["fword"]],
                      d["power"], d["lam_minus_one"], d["tag"],
                      Fraction(d["fcoef_num"], d["fcoef_den"]))
    raise ValueError(f"unknown factor type {d.get('t')!r}")


def expr_from_json(text: str) -> Expr:
    data = json.loads(text)
    terms = []
    for t in data["terms"]:
        coef = Scalar([(p["pi_pow"],
                        Fraction(p["re_num"], p["re_den"]),
                        Fraction(p["im_num"], p["im_den"]))
                       for p in t["coef"]])
        terms.append((tuple(_factor_from_json(f) for f in t["word"]), coef))
    return Expr(terms)
