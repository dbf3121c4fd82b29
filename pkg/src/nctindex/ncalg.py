"""Exact free *-algebra of noncommutative words over twist-decorated generators.

Generators are the idempotent ``e`` and the conformal factor ``k`` (with any
integer exponent), decorated by derivation chains ``d1``/``d2`` and by integer
powers of the twist ``s`` (with ``s^2 = D``, the modular automorphism).  An
atom with twist ``t`` and derivation word ``w`` stands for the element
``w(s^t(base))``: the twist is applied to the base first, the derivations act
outermost.  Atoms are opaque: no relation between ``e``, ``s(e)`` and ``D(e)``
is assumed, and derivations of twisted atoms are never re-expanded through the
conjugation that defines the twist.

Words may also contain two kinds of composite factors:

* ``B0Node`` -- a power of the resolvent ``(F |xi|^2 - lam)^-1`` (or with
  ``lam = -1`` substituted) of a conformally flat leading symbol ``F |xi|^2``.
  The node stores its own ``F`` word, because the only rewrites it supports
  depend on it: ``b0`` commutes with ``F`` as a block, and with any delta-free
  idempotent atom ``A`` satisfying ``A F = F = F A``.
* ``DmNode`` -- the modular-operator factor ``D_m(arg)``, the normal form of
  radial integrals.  Arguments are stored as canonical single words with the
  scalar pulled out.

Normalization is a fixed confluent-by-construction local rewrite: unit atoms
removed, adjacent k-powers merged, adjacent equal delta-free idempotent atoms
collapsed, resolvent powers merged and bubbled left past their own leading
factor.  Non-commuting factors are never reordered.
"""

from __future__ import annotations

from fractions import Fraction

from .scalars import Scalar


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------


class Atom:
    """One twist-decorated, derivation-decorated generator."""

    __slots__ = ("base", "kexp", "deltas", "twist")

    def __init__(self, base: str, kexp: int = 0, deltas=(), twist: int = 0):
        if base not in ("e", "k"):
            raise ValueError(f"unknown atom base {base!r}")
        deltas = tuple(sorted(deltas))
        if any(d not in (1, 2) for d in deltas):
            raise ValueError("derivation indices must be 1 or 2")
        if base == "k":
            twist = 0  # the twist fixes k, so s^t(k^n) is just k^n
            if deltas and kexp not in (0, 1):
                raise ValueError("derivations act on k itself; expand k^n first")
        else:
            kexp = 0
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "kexp", kexp)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "twist", twist)

    def __setattr__(self, *a):
        raise AttributeError("Atom is immutable")

    def _key(self):
        return ("A", self.base, self.kexp, self.deltas, self.twist)

    def __eq__(self, other):
        return isinstance(other, Atom) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def is_unit(self) -> bool:
        return self.base == "k" and self.kexp == 0 and not self.deltas

    def is_zero(self) -> bool:
        # a derivation of the unit k^0
        return self.base == "k" and self.kexp == 0 and bool(self.deltas)

    def with_delta(self, i: int) -> "Atom":
        return Atom(self.base, self.kexp, self.deltas + (i,), self.twist)

    def with_twist(self, s: int) -> "Atom":
        if self.base == "k":
            return self
        return Atom(self.base, self.kexp, self.deltas, self.twist + s)

    def __repr__(self):
        return f"Atom({self.base!r}, kexp={self.kexp}, deltas={self.deltas}, twist={self.twist})"


class B0Node:
    """Power of the resolvent of a conformally flat leading symbol.

    Represents ``b0^power`` with ``b0 = (fcoef * F |xi|^2 - lam)^-1`` where F
    is the stored atom word; after the contour substitution the node stands
    for ``(fcoef * F u + 1)^-1`` in the radial variable ``u = r^2``.
    """

    __slots__ = ("fword", "fcoef", "power", "lam_minus_one", "tag")

    def __init__(self, fword, power: int = 1, lam_minus_one: bool = False,
                 tag: str = "", fcoef: Fraction = Fraction(1)):
        fword = tuple(fword)
        if not all(isinstance(a, Atom) for a in fword):
            raise ValueError("resolvent leading factor must be a pure atom word")
        if power < 1:
            raise ValueError("resolvent power must be positive")
        object.__setattr__(self, "fword", fword)
        object.__setattr__(self, "fcoef", Fraction(fcoef))
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "lam_minus_one", bool(lam_minus_one))
        object.__setattr__(self, "tag", tag)

    def __setattr__(self, *a):
        raise AttributeError("B0Node is immutable")

    def _key(self):
        return ("B", tuple(a._key() for a in self.fword), self.fcoef,
                self.power, self.lam_minus_one)

    def __eq__(self, other):
        return isinstance(other, B0Node) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def with_power(self, p: int) -> "B0Node":
        return B0Node(self.fword, p, self.lam_minus_one, self.tag, self.fcoef)

    def __repr__(self):
        return f"B0Node(tag={self.tag!r}, power={self.power}, lam_minus_one={self.lam_minus_one})"


class DmNode:
    """Modular-operator factor D_m(arg); arg is a canonical single word."""

    __slots__ = ("m", "arg_word")

    def __init__(self, m: int, arg_word):
        if m < 0:
            raise ValueError("modular index m must be non-negative")
        arg_word = tuple(arg_word)
        if any(isinstance(f, B0Node) for f in arg_word):
            raise ValueError("D_m argument must not contain resolvents")
        for f in arg_word:
            if isinstance(f, DmNode):
                for g in f.arg_word:
                    if isinstance(g, DmNode):
                        raise ValueError("D_m nesting deeper than one level")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "arg_word", arg_word)

    def __setattr__(self, *a):
        raise AttributeError("DmNode is immutable")

    def _key(self):
        return ("D", self.m, tuple(f._key() for f in self.arg_word))

    def __eq__(self, other):
        return isinstance(other, DmNode) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"DmNode(m={self.m}, arg={self.arg_word!r})"


# common atoms
E = Atom("e")
SE = Atom("e", twist=1)        # s(e)
DE = Atom("e", twist=2)        # D(e) = s^2(e)


def K(n: int = 1) -> Atom:
    return Atom("k", kexp=n)


# ---------------------------------------------------------------------------
# word normalization
# ---------------------------------------------------------------------------


def word_key(word) -> tuple:
    return tuple(f._key() for f in word)


def _absorbs(atom: Atom, node: B0Node) -> bool:
    """True when atom A is delta-free idempotent with A F = F = F A."""
    if atom.base != "e" or atom.deltas:
        return False
    f = node.fword
    left = normalize_word((atom,) + f)
    right = normalize_word(f + (atom,))
    return left == f and right == f


def normalize_word(word):
    """Confluent local rewrite; returns the canonical factor tuple or None (zero)."""
    w = list(word)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(w):
            f = w[i]
            if isinstance(f, Atom):
                if f.is_zero():
                    return None
                if f.is_unit():
                    del w[i]
                    changed = True
                    continue
                if i + 1 < len(w):
                    g = w[i + 1]
                    if isinstance(g, Atom):
                        if (f.base == "k" and g.base == "k"
                                and not f.deltas and not g.deltas):
                            n = f.kexp + g.kexp
                            del w[i:i + 2]
                            if n != 0:
                                w.insert(i, Atom("k", kexp=n))
                            changed = True
                            continue
                        if (f.base == "e" and g.base == "e"
                                and not f.deltas and not g.deltas
                                and f.twist == g.twist):
                            del w[i + 1]
                            changed = True
                            continue
                    elif isinstance(g, B0Node):
                        # block commutation first: whole F word left of b0
                        nf = len(g.fword)
                        if (nf and i + 1 >= nf
                                and tuple(w[i + 1 - nf:i + 1]) == g.fword):
                            w[i + 1 - nf:i + 2] = [g] + list(g.fword)
                            changed = True
                            continue
                        if _absorbs(f, g):
                            w[i], w[i + 1] = g, f
                            changed = True
                            continue
            elif isinstance(f, B0Node):
                if i + 1 < len(w) and isinstance(w[i + 1], B0Node):
                    g = w[i + 1]
                    if (f.fword == g.fword and f.fcoef == g.fcoef
                            and f.lam_minus_one == g.lam_minus_one):
                        w[i:i + 2] = [f.with_power(f.power + g.power)]
                        changed = True
                        continue
            i += 1
    return tuple(w)


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


class Expr:
    """Exact linear combination of noncommutative words.

    Immutable; supports +, -, * (noncommutative), and scalar multiplication
    by int / Fraction / Scalar.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        acc: dict[tuple, list] = {}
        if isinstance(terms, dict):
            terms = terms.items()
        for word, coef in terms:
            if not isinstance(coef, Scalar):
                coef = Scalar.of(coef)
            if coef.is_zero():
                continue
            nw = normalize_word(word)
            if nw is None:
                continue
            k = word_key(nw)
            if k in acc:
                acc[k][1] = acc[k][1] + coef
            else:
                acc[k] = [nw, coef]
        object.__setattr__(
            self,
            "_terms",
            {k: (w, c) for k, (w, c) in sorted(acc.items()) if not c.is_zero()},
        )

    def __setattr__(self, *a):
        raise AttributeError("Expr is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "Expr":
        return Expr()

    @staticmethod
    def one() -> "Expr":
        return Expr([((), Scalar.one())])

    @staticmethod
    def word(*factors, coef=None) -> "Expr":
        return Expr([(tuple(factors), coef if coef is not None else Scalar.one())])

    @staticmethod
    def scalar(c) -> "Expr":
        return Expr([((), c if isinstance(c, Scalar) else Scalar.of(c))])

    # -- queries -----------------------------------------------------------

    def items(self):
        return [(w, c) for (w, c) in self._terms.values()]

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, word) -> Scalar:
        nw = normalize_word(tuple(word))
        if nw is None:
            return Scalar.zero()
        got = self._terms.get(word_key(nw))
        return got[1] if got else Scalar.zero()

    def term_key(self) -> tuple:
        """Hashable canonical form, e.g. for use inside DmNode comparisons."""
        return tuple((k, c) for k, (w, c) in self._terms.items())

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "Expr") -> "Expr":
        if not isinstance(other, Expr):
            return NotImplemented
        return Expr(self.items() + other.items())

    def __sub__(self, other: "Expr") -> "Expr":
        return self + (-other)

    def __neg__(self) -> "Expr":
        return Expr([(w, -c) for w, c in self.items()])

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            s = other if isinstance(other, Scalar) else Scalar.of(other)
            return Expr([(w, c * s) for w, c in self.items()])
        if not isinstance(other, Expr):
            return NotImplemented
        out = []
        for w1, c1 in self.items():
            for w2, c2 in other.items():
                out.append((w1 + w2, c1 * c2))
        return Expr(out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        return isinstance(other, Expr) and self.term_key() == other.term_key()

    def __hash__(self):
        return hash(self.term_key())

    def __repr__(self):
        from .emit import emit_text
        return f"Expr({emit_text(self)})"


# ---------------------------------------------------------------------------
# derivations and twists
# ---------------------------------------------------------------------------


def _delta_atom(i: int, f: Atom):
    """d_i of a single atom, as a list of (replacement word, Fraction) pairs.

    Powers k^n with n not in {0, 1} expand by the Leibniz rule into words in
    d_i(k); every other atom just grows its derivation chain.
    """
    if f.base == "e" or f.kexp == 1 or f.deltas:
        return [((f.with_delta(i),), Fraction(1))]
    n = f.kexp
    dk = Atom("k", kexp=1, deltas=(i,))
    out = []
    if n > 0:
        for j in range(n):
            pre = (Atom("k", kexp=j),) if j else ()
            post = (Atom("k", kexp=n - 1 - j),) if n - 1 - j else ()
            out.append((pre + (dk,) + post, Fraction(1)))
    else:
        # d(k^-1) = -k^-1 d(k) k^-1, iterated
        for j in range(-n):
            out.append(((Atom("k", kexp=-j - 1), dk, Atom("k", kexp=n + j)),
                        Fraction(-1)))
    return out


def apply_delta(i: int, expr: Expr) -> Expr:
    """Leibniz derivation d_i.  Atoms grow their derivation chain; twists are
    carried along unchanged (the opaque-atom convention).  Resolvent factors
    need symbol context (they produce xi-monomials) and are rejected here."""
    if i not in (1, 2):
        raise ValueError("derivation index must be 1 or 2")
    out = []
    for word, coef in expr.items():
        for j, f in enumerate(word):
            if isinstance(f, Atom):
                for repl, q in _delta_atom(i, f):
                    out.append((word[:j] + repl + word[j + 1:], coef * q))
            elif isinstance(f, B0Node):
                raise ValueError(
                    "derivation of a resolvent factor requires symbol context")
            else:
                raise ValueError(
                    "derivation does not act on stored D_m factors")
    return Expr(out)


def apply_twist(s: int, expr: Expr) -> Expr:
    """Algebra homomorphism raising every atom's twist by s (fixes k-atoms).

    Functions of the modular operator commute with the twist, so D_m factors
    twist their argument; resolvents twist their leading factor word.
    """
    out = []
    for word, coef in expr.items():
        nw = []
        for f in word:
            if isinstance(f, Atom):
                nw.append(f.with_twist(s))
            elif isinstance(f, DmNode):
                nw.append(DmNode(f.m, [g.with_twist(s) if isinstance(g, Atom)
                                       else _twist_factor(g, s)
                                       for g in f.arg_word]))
            else:
                nw.append(B0Node([a.with_twist(s) for a in f.fword],
                                 f.power, f.lam_minus_one, f.tag, f.fcoef))
        out.append((tuple(nw), coef))
    return Expr(out)


def _twist_factor(f, s):
    if isinstance(f, DmNode):
        return DmNode(f.m, [g.with_twist(s) if isinstance(g, Atom)
                            else _twist_factor(g, s) for g in f.arg_word])
    raise ValueError("unexpected nested factor")


def normalize(expr: Expr) -> Expr:
    """Idempotent by construction: Expr instances are always normalized."""
    return Expr(expr.items())


def dm_factors(m: int, arg: Expr):
    """Distribute D_m over its argument: list of (scalar, DmNode) pairs."""
    out = []
    for word, coef in arg.items():
        out.append((coef, DmNode(m, word)))
    return out


def dm(m: int, arg: Expr) -> Expr:
    """D_m applied to an Expr argument, distributed over terms."""
    return Expr([((node,), coef) for coef, node in dm_factors(m, arg)])


# ---------------------------------------------------------------------------
# structural helpers
# ---------------------------------------------------------------------------


def words_of(expr: Expr):
    return [w for w, _ in expr.items()]


def contains_b0(expr: Expr) -> bool:
    return any(isinstance(f, B0Node) for w, _ in expr.items() for f in w)


def contains_dm(expr: Expr) -> bool:
    return any(isinstance(f, DmNode) for w, _ in expr.items() for f in w)


def flat_word(word):
    """Substitute k -> 1 in a single word.

    Twists vanish, k-atoms become the unit, derivations of k die, and D_m
    factors collapse to 1/(m+1) times their flattened argument (the value of
    the defining function at 1).  Returns a list of (word, Fraction-scalar
    multiplier) pairs.
    """
    results = [((), Scalar.one())]
    for f in word:
        new_results = []
        if isinstance(f, Atom):
            if f.base == "k":
                if f.deltas:
                    return []  # derivative of a constant: term vanishes
                # k^n -> 1: drop the factor
                new_results = results
            else:
                flat = Atom("e", deltas=f.deltas, twist=0)
                new_results = [(w + (flat,), c) for w, c in results]
        elif isinstance(f, DmNode):
            inner = flat_expr(Expr([(f.arg_word, Scalar.one())]))
            scale = Scalar.of(Fraction(1, f.m + 1))
            for w0, c0 in results:
                for wi, ci in inner.items():
                    new_results.append((w0 + wi, c0 * ci * scale))
        else:
            raise ValueError("flat reduction applies after radial integration"
                             " (no resolvent factors expected)")
        results = new_results
        if not results:
            return []
    return results


def flat_expr(expr: Expr) -> Expr:
    out = []
    for word, coef in expr.items():
        for w, c in flat_word(word):
            out.append((w, coef * c))
    return Expr(out)
