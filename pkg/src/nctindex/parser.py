"""Recursive-descent parser for the expression grammar.

Grammar (whitespace separates tokens; juxtaposition multiplies)::

    expr    :=  ['-'] term (('+' | '-') term)*
    term    :=  factor (['*'] factor)*
    factor  :=  scalar | atom | '(' expr ')'
    scalar  :=  INT ['/' INT] | 'i' | 'pi' ['^' SINT]
    atom    :=  'e' | 'k' ['^' SINT]
             |  's' ['^' SINT] '(' expr ')'      -- twist
             |  'D' '(' expr ')'                 -- squared twist
             |  'd1' '(' expr ')' | 'd2' '(' expr ')'
             |  'Dm' '[' INT ']' '(' expr ')'

Derivations and twists applied to compound arguments expand through the
algebra operations (Leibniz rule, homomorphism), so parsing normalizes.
"""

from __future__ import annotations

from fractions import Fraction

from .ncalg import Atom, Expr, apply_delta, apply_twist, dm
from .scalars import Scalar


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


_PUNCT = "+-*/^()[]"


def _tokenize(src: str):
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch in _PUNCT:
            toks.append((ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(src) and src[j].isdigit():
                j += 1
            toks.append(("INT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("NAME", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1]!r}", t[2], t[3])
        return t

    def error(self, msg):
        t = self.peek()
        raise ParseError(msg, t[2], t[3])

    # -- grammar -----------------------------------------------------------

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t[0] != "EOF":
            self.error(f"trailing input {t[1]!r}")
        return e

    def expr(self) -> Expr:
        negate = False
        if self.peek()[0] == "-":
            self.next()
            negate = True
        acc = self.term()
        if negate:
            acc = -acc
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term(self) -> Expr:
        acc = self.factor()
        while True:
            t = self.peek()
            if t[0] == "*":
                self.next()
                acc = acc * self.factor()
            elif t[0] in ("INT", "NAME", "("):
                acc = acc * self.factor()
            else:
                return acc

    def _signed_int(self) -> int:
        neg = False
        if self.peek()[0] == "-":
            self.next()
            neg = True
        t = self.expect("INT")
        return -int(t[1]) if neg else int(t[1])

    def factor(self) -> Expr:
        t = self.peek()
        if t[0] == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t[0] == "INT":
            self.next()
            num = int(t[1])
            if self.peek()[0] == "/":
                self.next()
                den = int(self.expect("INT")[1])
                if den == 0:
                    self.error("zero denominator")
                return Expr.scalar(Scalar.of(Fraction(num, den)))
            return Expr.scalar(Scalar.of(num))
        if t[0] != "NAME":
            self.error(f"expected a factor, found {t[1]!r}")
        name = t[1]
        self.next()
        if name == "e":
            return Expr.word(Atom("e"))
        if name == "k":
            n = 1
            if self.peek()[0] == "^":
                self.next()
                n = self._signed_int()
            return Expr.one() if n == 0 else Expr.word(Atom("k", kexp=n))
        if name == "i":
            return Expr.scalar(Scalar.i())
        if name == "pi":
            n = 1
            if self.peek()[0] == "^":
                self.next()
                n = self._signed_int()
            return Expr.scalar(Scalar.pi(n))
        if name == "s":
            power = 1
            if self.peek()[0] == "^":
                self.next()
                power = self._signed_int()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return apply_twist(power, inner)
        if name == "D":
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return apply_twist(2, inner)
        if name in ("d1", "d2"):
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return apply_delta(int(name[1]), inner)
        if name == "Dm":
            self.expect("[")
            m = int(self.expect("INT")[1])
            self.expect("]")
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return dm(m, inner)
        raise ParseError(f"unknown atom {name!r}", t[2], t[3])


def parse_expr(src: str) -> Expr:
    """Parse source text into a normalized Expr.  Raises ParseError."""
    return _Parser(src).parse()
