"""Pseudodifferential symbols with noncommutative-word coefficients.

A Symbol maps commutative monomials xi1^a xi2^b lam^c to Expr coefficients.
lam carries homogeneity weight 2, so the resolvent-expansion terms b_n are
homogeneous of order -2-n term by term (resolvent factors count -2 per
power).  The composition rule is the asymptotic expansion

    sym(P Q) ~ sum_{i1,i2} 1/(i1! i2!) d_xi1^i1 d_xi2^i2 sym(P)
                           d1^i1 d2^i2 sym(Q),

and the parametrix of an operator with conformally flat leading part
F (xi1^2 + xi2^2) is generated by the standard recursion seeded with the
opaque resolvent node b0 = (p2 - lam)^-1.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .ncalg import Atom, B0Node, Expr, apply_delta, normalize_word
from .scalars import Scalar

Mono = tuple  # (a, b, c): xi1^a xi2^b lam^c


class Symbol:
    """Finite sum of monomial * Expr terms."""

    def __init__(self, coeffs=None, declared_order: int = 0):
        acc: dict[Mono, Expr] = {}
        if coeffs:
            for mono, expr in (coeffs.items() if isinstance(coeffs, dict)
                               else coeffs):
                mono = tuple(mono)
                if len(mono) != 3 or any(x < 0 for x in mono[:2]) or mono[2] < 0:
                    raise ValueError(f"bad monomial {mono}")
                if mono in acc:
                    acc[mono] = acc[mono] + expr
                else:
                    acc[mono] = expr
        self.coeffs = {m: e for m, e in sorted(acc.items()) if not e.is_zero()}
        self.declared_order = declared_order

    def items(self):
        return list(self.coeffs.items())

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        return Symbol(self.items() + other.items(),
                      max(self.declared_order, other.declared_order))

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return Symbol([(m, e * c) for m, e in self.items()], self.declared_order)

    def __eq__(self, other):
        return isinstance(other, Symbol) and self.coeffs == other.coeffs

    def homogeneous_part(self, k: int) -> "Symbol":
        """Terms of xi-degree + 2 lam-degree - 2 (resolvent power) == k."""
        out = []
        for (a, b, c), e in self.items():
            for word, coef in e.items():
                bpow = sum(f.power for f in word if isinstance(f, B0Node))
                if a + b + 2 * c - 2 * bpow == k:
                    out.append(((a, b, c), Expr([(word, coef)])))
        return Symbol(out, k)

    def term_count(self) -> int:
        return sum(len(e) for _, e in self.items())

    def map_exprs(self, f) -> "Symbol":
        return Symbol([(m, f(e)) for m, e in self.items()], self.declared_order)

    def __repr__(self):
        from .emit import emit_text
        bits = []
        for (a, b, c), e in self.items():
            mono = "".join(s for s, p in (("x1", a), ("x2", b), ("lam", c))
                           for s in [s + (f"^{p}" if p > 1 else "")] if p)
            bits.append(f"[{mono or '1'}] ({emit_text(e)})")
        return "Symbol(" + " + ".join(bits) + ")"


def sym_xi(i: int) -> Symbol:
    mono = (1, 0, 0) if i == 1 else (0, 1, 0)
    return Symbol([(mono, Expr.one())], 1)


def sym_lambda() -> Symbol:
    return Symbol([((0, 0, 1), Expr.one())], 2)


def sym_const(e: Expr) -> Symbol:
    return Symbol([((0, 0, 0), e)], 0)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------


def _xi_derivative_word(word, i: int):
    """d/dxi_i of an Expr word: only resolvent factors depend on xi, via
    d(b0^p) = -p b0^(p+1) dF|xi|^2/dxi_i = -2p xi_i F b0^(p+1) (F commutes
    with its own resolvent).  Yields (word, coef Fraction, dmono) tuples."""
    for j, f in enumerate(word):
        if isinstance(f, B0Node):
            repl = (f.with_power(f.power + 1),) + f.fword
            coef = Fraction(-2 * f.power) * f.fcoef
            yield (word[:j] + repl + word[j + 1:], coef,
                   (1, 0, 0) if i == 1 else (0, 1, 0))


def xi_derivative(sym: Symbol, i: int) -> Symbol:
    out = []
    for (a, b, c), e in sym.items():
        # monomial part
        deg = a if i == 1 else b
        if deg:
            mono = (a - 1, b, c) if i == 1 else (a, b - 1, c)
            out.append((mono, e * deg))
        # resolvent part
        for word, coef in e.items():
            for nw, q, dm in _xi_derivative_word(word, i):
                out.append(((a + dm[0], b + dm[1], c),
                            Expr([(nw, coef * Scalar.of(q))])))
    return Symbol(out, sym.declared_order - 1)


def symbol_delta(sym: Symbol, i: int) -> Symbol:
    """Algebra derivation d_i applied to every coefficient.

    On resolvent factors d_i(b0^p) expands into the chain
    -sum_a b0^a d_i(F) |xi|^2 b0^(p-a+1).
    """
    out = []
    for (a, b, c), e in sym.items():
        for word, coef in e.items():
            for j, f in enumerate(word):
                if isinstance(f, Atom):
                    from .ncalg import _delta_atom
                    for repl, q in _delta_atom(i, f):
                        out.append(((a, b, c),
                                    Expr([(word[:j] + repl + word[j + 1:],
                                           coef * Scalar.of(q))])))
                elif isinstance(f, B0Node):
                    dF = apply_delta(i, Expr([(f.fword, Scalar.of(f.fcoef))]))
                    for fw, fc in dF.items():
                        for apow in range(1, f.power + 1):
                            left = (f.with_power(apow),)
                            right = (f.with_power(f.power - apow + 1),)
                            for xm in ((2, 0, 0), (0, 2, 0)):
                                out.append(((a + xm[0], b + xm[1], c),
                                            Expr([(word[:j] + left + fw
                                                   + right + word[j + 1:],
                                                   -coef * fc)])))
                else:
                    raise ValueError("derivation of a stored D_m factor")
    return Symbol(out, sym.declared_order)


def compose(p: Symbol, q: Symbol, max_order_drop: int) -> Symbol:
    """Asymptotic product expansion, truncated at i1 + i2 <= max_order_drop."""
    if max_order_drop < 0:
        raise ValueError("max_order_drop must be non-negative")
    total = Symbol()
    for i1 in range(max_order_drop + 1):
        for i2 in range(max_order_drop + 1 - i1):
            dp = p
            for _ in range(i1):
                dp = xi_derivative(dp, 1)
            for _ in range(i2):
                dp = xi_derivative(dp, 2)
            if dp.is_zero():
                continue
            dq = q
            for _ in range(i1):
                dq = symbol_delta(dq, 1)
            for _ in range(i2):
                dq = symbol_delta(dq, 2)
            if dq.is_zero():
                continue
            scale = Fraction(1, math.factorial(i1) * math.factorial(i2))
            prod = []
            for (a1, b1, c1), e1 in dp.items():
                for (a2, b2, c2), e2 in dq.items():
                    prod.append(((a1 + a2, b1 + b2, c1 + c2),
                                 (e1 * e2) * scale))
            total = total + Symbol(prod)
    total.declared_order = p.declared_order + q.declared_order
    return total


# ---------------------------------------------------------------------------
# operator symbols
# ---------------------------------------------------------------------------


def _word(*factors) -> Expr:
    return Expr.word(*factors)


SE = Atom("e", twist=1)
DE = Atom("e", twist=2)


def K(n=1):
    return Atom("k", kexp=n)


def d(i, atom):
    return atom.with_delta(i)


def symbol_L_minus() -> Symbol:
    """Symbol of the minus-side operator s(e) delbar s(e) k^2 del.

    p2 = s(e)^2 k^2 |xi|^2 (the square collapses), p1 as printed, p0 = 0.
    """
    i = Scalar.i()
    p2coef = _word(SE, K(2))
    d1G = apply_delta(1, _word(SE, K(2)))
    d2G = apply_delta(2, _word(SE, K(2)))
    se = _word(SE)
    c1 = se * d1G - (se * d2G) * i
    c2 = se * d2G + (se * d1G) * i
    return Symbol([
        ((2, 0, 0), p2coef),
        ((0, 2, 0), p2coef),
        ((1, 0, 0), c1),
        ((0, 1, 0), c2),
    ], 2)


def symbol_L_plus(delta_form: bool = True) -> Symbol:
    """Symbol of the plus-side operator k^-1 s(e) k^2 del s(e) delbar k.

    With delta_form=True (the pipeline's convention) the leading coefficient
    is written D(e) k^2 D(e) and the prefix k^-1 s(e) k^2 collapses to
    D(e) k, using the sound conjugation rewrite k^-1 [delta-free word] k =
    twist-raise; otherwise the parts are returned exactly as first derived
    (prefix k^-1 s(e) k^2, leading word k^-1 s(e) k^2 s(e) k).
    """
    i = Scalar.i()
    if delta_form:
        p2coef = _word(DE, K(2), DE)
        pref = _word(DE, K(1))
    else:
        p2coef = _word(K(-1), SE, K(2), SE, K(1))
        pref = _word(K(-1), SE, K(2))
    d1k = Atom("k", kexp=1, deltas=(1,))
    d2k = Atom("k", kexp=1, deltas=(2,))
    d1se = Atom("e", deltas=(1,), twist=1)
    d2se = Atom("e", deltas=(2,), twist=1)
    c1 = pref * (_word(SE, d1k) * 2 + _word(d1se, K(1)) + _word(d2se, K(1)) * i)
    c2 = pref * (_word(SE, d2k) * 2 + _word(d2se, K(1)) - _word(d1se, K(1)) * i)
    c0 = pref * (_word(d1se, d1k) + _word(SE, Atom("k", 1, (1, 1)))
                 + _word(d2se, d2k) + _word(SE, Atom("k", 1, (2, 2)))
                 + (_word(d2se, d1k) - _word(d1se, d2k)) * i)
    return Symbol([
        ((2, 0, 0), p2coef),
        ((0, 2, 0), p2coef),
        ((1, 0, 0), c1),
        ((0, 1, 0), c2),
        ((0, 0, 0), c0),
    ], 2)


def flat_laplacian() -> Symbol:
    return Symbol([((2, 0, 0), Expr.one()), ((0, 2, 0), Expr.one())], 2)


# ---------------------------------------------------------------------------
# parametrix recursion
# ---------------------------------------------------------------------------


def leading_factor(p: Symbol):
    """Extract (coef, word) of the conformally flat leading part F |xi|^2."""
    p2 = p.homogeneous_part(2)
    c20 = p2.coeffs.get((2, 0, 0), Expr.zero())
    c02 = p2.coeffs.get((0, 2, 0), Expr.zero())
    extra = set(p2.coeffs) - {(2, 0, 0), (0, 2, 0)}
    if extra or c20 != c02 or len(c20) != 1:
        raise ValueError("unsupported leading symbol: need F (xi1^2 + xi2^2) "
                         "with a single-word F")
    word, coef = c20.items()[0]
    if not coef.is_single_power() or coef.pi_power != 0 or coef.im != 0 \
            or coef.re <= 0:
        raise ValueError("unsupported leading symbol: F must have a positive "
                         "rational coefficient")
    if not all(isinstance(f, Atom) for f in word):
        raise ValueError("unsupported leading symbol: F must be an atom word")
    return coef.re, word


def parametrix(p: Symbol, n_max: int, tag: str = "b0") -> list[Symbol]:
    """Resolvent-expansion terms b_0 .. b_n_max of (p - lam)^-1."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    fcoef, fword = leading_factor(p)
    b0node = B0Node(fword, 1, lam_minus_one=False, tag=tag, fcoef=fcoef)
    b0 = sym_const(Expr.word(b0node))
    parts = {k: p.homogeneous_part(k) for k in (0, 1, 2)}
    bs = [b0]
    for n in range(1, n_max + 1):
        acc = Symbol()
        for j in range(n):
            for k in (0, 1, 2):
                if parts[k].is_zero():
                    continue
                rem = n - (j + 2 - k)
                if rem < 0:
                    continue
                for i1 in range(rem + 1):
                    i2 = rem - i1
                    dp = bs[j]
                    for _ in range(i1):
                        dp = xi_derivative(dp, 1)
                    for _ in range(i2):
                        dp = xi_derivative(dp, 2)
                    if dp.is_zero():
                        continue
                    dq = parts[k]
                    for _ in range(i1):
                        dq = symbol_delta(dq, 1)
                    for _ in range(i2):
                        dq = symbol_delta(dq, 2)
                    if dq.is_zero():
                        continue
                    scale = Fraction(-1, math.factorial(i1) * math.factorial(i2))
                    prod = []
                    for (a1, b1, c1), e1 in dp.items():
                        for (a2, b2, c2), e2 in dq.items():
                            prod.append(((a1 + a2, b1 + b2, c1 + c2),
                                         (e1 * e2) * scale))
                    acc = acc + Symbol(prod)
        bn_terms = []
        for mono, e in acc.items():
            bn_terms.append((mono, e * Expr.word(b0node)))
        bn = Symbol(bn_terms, -2 - n)
        _assert_homogeneous(bn, -2 - n)
        bs.append(bn)
    return bs


def _assert_homogeneous(sym: Symbol, order: int):
    for (a, b, c), e in sym.items():
        for word, _ in e.items():
            bpow = sum(f.power for f in word if isinstance(f, B0Node))
            got = a + b + 2 * c - 2 * bpow
            if got != order:
                raise AssertionError(
                    f"inhomogeneous term of order {got}, expected {order}")


def set_lambda_minus_one(sym: Symbol) -> Symbol:
    """Substitute lam = -1: resolvents flip their flag, lam monomials turn
    into (-1)^c scalars."""
    out = []
    for (a, b, c), e in sym.items():
        terms = []
        for word, coef in e.items():
            nw = tuple(B0Node(f.fword, f.power, True, f.tag, f.fcoef)
                       if isinstance(f, B0Node) else f for f in word)
            terms.append((nw, coef * ((-1) ** c)))
        out.append(((a, b, 0), Expr(terms)))
    return Symbol(out, sym.declared_order)
