"""Radial-integral pipeline: from resolvent-expansion symbols to the
modular-operator normal form of the heat-coefficient traces.

Stages (each preserves the trace of the eventual integral):

1. angular integration: xi -> polar coordinates, odd moments vanish, even
   moments contribute rational multiples of 2 pi; resolvents are radial.
2. leftmost-resolvent normalization: inside the trace every term is rotated
   cyclically so that its largest resolvent run leads; the run's own leading
   factor commutes through it, exposing the twisted idempotent to its right.
3. integration by parts: interior resolvent runs of power >= 2 always carry
   their leading factor; u G b0^q = b0^{q-1} - b0^q in derivative form lowers
   them to single interior resolvents, growing the leading run.
4. rearrangement: each term now matches
       int u^m b0^{m+1} (head rho) b0 du  (single interior resolvent)
   or the all-left form with the trailing resolvent split off cyclically, and
   is replaced by its modular-operator normal form
       head D_m(k^{-(2m+2)} head rho head) [head]  (sandwich per side).
5. cyclic canonicalization for stable golden comparison.

The pipeline computes tau(a2) = -1/2 sum int_0^inf ... du with every sign,
factor 2 pi, and the u-substitution half tracked in exact scalars.
"""

from __future__ import annotations

from fractions import Fraction

from .ncalg import (Atom, B0Node, DmNode, Expr, apply_delta, normalize_word,
                    word_key)
from .scalars import Scalar
from .symbols import (Symbol, parametrix, set_lambda_minus_one,
                      symbol_L_minus, symbol_L_plus)

SE = Atom("e", twist=1)
DE = Atom("e", twist=2)


def K(n):
    return Atom("k", kexp=n)


class PipelineError(ValueError):
    pass


# ---------------------------------------------------------------------------
# radial integrand container
# ---------------------------------------------------------------------------


class RadialIntegrand:
    """Sum of c * u^s * word with resolvent factors evaluated at radius u."""

    def __init__(self, terms=()):
        acc: dict = {}
        for coef, s, word in terms:
            if coef.is_zero():
                continue
            nw = normalize_word(word)
            if nw is None:
                continue
            key = (s, word_key(nw))
            if key in acc:
                acc[key][0] = acc[key][0] + coef
            else:
                acc[key] = [coef, s, nw]
        self.terms = [(c, s, w) for key, (c, s, w) in sorted(acc.items())
                      if not c.is_zero()]

    def __len__(self):
        return len(self.terms)

    def assert_convergent(self):
        # per term, r-degree + 1 - 2 (sum of resolvent powers) <= -3
        for coef, s, word in self.terms:
            bpow = sum(f.power for f in word if isinstance(f, B0Node))
            if 2 * s + 1 - 2 * bpow > -3:
                raise PipelineError(
                    f"nonconvergent radial term: u^{s} with resolvent "
                    f"power {bpow}")


# ---------------------------------------------------------------------------
# stage 1: angular integration
# ---------------------------------------------------------------------------


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def angular_moment(a: int, b: int) -> Scalar:
    """int_0^{2 pi} cos^a sin^b dtheta as an exact multiple of pi."""
    if a % 2 or b % 2:
        return Scalar.zero()
    num = _double_factorial(a - 1) * _double_factorial(b - 1)
    den = _double_factorial(a + b)
    return Scalar.of(Fraction(2 * num, den), 0, 1)


def angular_integrate(b2: Symbol) -> RadialIntegrand:
    """Polar substitution and angular integration of a lam = -1 symbol."""
    out = []
    for (a, b, c), e in b2.items():
        if c != 0:
            raise PipelineError("angular integration expects lam = -1 input")
        mom = angular_moment(a, b)
        if mom.is_zero():
            continue
        if (a + b) % 2:
            raise PipelineError("odd surviving angular moment")
        s = (a + b) // 2
        for word, coef in e.items():
            for f in word:
                if isinstance(f, B0Node) and not f.lam_minus_one:
                    raise PipelineError("resolvent still carries lam")
            out.append((coef * mom, s, word))
    r = RadialIntegrand(out)
    r.assert_convergent()
    return r


# ---------------------------------------------------------------------------
# stage 2: leftmost-resolvent normalization (trace rotation)
# ---------------------------------------------------------------------------


def _b0_runs(word):
    """Positions of resolvent nodes (after normalization runs are single
    merged nodes)."""
    return [j for j, f in enumerate(word) if isinstance(f, B0Node)]


def _rotate(word, j):
    return word[j:] + word[:j]


def leftmost_b0_normalize(t: RadialIntegrand, audit: list | None = None
                          ) -> RadialIntegrand:
    """Cyclically rotate each trace word so its largest resolvent run leads.

    After normalization the run's own leading-factor block has commuted to
    its right, so the twisted idempotent sits immediately right of the
    leading resolvents.
    """
    out = []
    for coef, s, word in t.terms:
        runs = _b0_runs(word)
        if not runs:
            raise PipelineError("term without resolvent factors")
        best = None
        for j in runs:
            cand = normalize_word(_rotate(word, j))
            if cand is None or not isinstance(cand[0], B0Node):
                continue
            key = (-cand[0].power, word_key(cand))
            if best is None or key < best[0]:
                best = (key, cand, j)
        if best is None:
            raise PipelineError(f"non-normalizable term: {word!r}")
        if audit is not None:
            audit.append((word, best[2]))
        out.append((coef, s, best[1]))
    return RadialIntegrand(out)


# ---------------------------------------------------------------------------
# stage 3: integration by parts
# ---------------------------------------------------------------------------


def ibp_reduce(t: RadialIntegrand, max_sweeps: int = 16) -> RadialIntegrand:
    """Lower interior resolvent runs to power one by integration by parts.

    An interior run keeps its leading-factor block adjacent (the expansion
    only produces them through derivatives of resolvents), so with
    d/du b0^{p-1} = -(p-1) fcoef F b0^p the block b0^p F is a derivative:

        int A (b0^p F) B du = 1/((p-1) fcoef) *
            [ int d(u^s A)/du b0^{p-1} B du + int u^s A b0^{p-1} dB/du du ]

    after one integration by parts; boundary terms vanish by the convergence
    invariant, asserted beforehand."""
    t.assert_convergent()
    cur = t.terms
    for _ in range(max_sweeps):
        nxt = []
        changed = False
        for coef, s, word in cur:
            j = _find_interior_high_run(word)
            if j is None:
                nxt.append((coef, s, word))
                continue
            changed = True
            node = word[j]
            nf = len(node.fword)
            if nf and tuple(word[j + 1:j + 1 + nf]) != node.fword:
                raise PipelineError(
                    "interior resolvent run without its leading factor")
            p = node.power
            pre = word[:j]
            post = word[j + 1 + nf:]
            X = (node.with_power(p - 1),)
            scale = Scalar.of(Fraction(1, p - 1)).divided_by(node.fcoef)
            base = coef * scale
            # d/du hit on the u power
            if s:
                nxt.append((base * s, s - 1, pre + X + post))
            # d/du hits on resolvent nodes in the prefix and suffix
            for part, is_pre in ((pre, True), (post, False)):
                for jj, f in enumerate(part):
                    if not isinstance(f, B0Node):
                        continue
                    repl = f.fword + (f.with_power(f.power + 1),)
                    c2 = base * Scalar.of(f.fcoef * (-f.power))
                    npart = part[:jj] + repl + part[jj + 1:]
                    w2 = (npart + X + post) if is_pre else (pre + X + npart)
                    nxt.append((c2, s, w2))
        cur = RadialIntegrand(nxt).terms
        if not changed:
            break
    else:
        raise PipelineError("interior resolvent reduction did not terminate")
    out = RadialIntegrand(cur)
    out.assert_convergent()
    return out


def _find_interior_high_run(word):
    for j, f in enumerate(word):
        if j == 0:
            continue
        if isinstance(f, B0Node) and f.power >= 2:
            return j
    return None


# ---------------------------------------------------------------------------
# stage 4: rearrangement into modular-operator normal form
# ---------------------------------------------------------------------------


def _side_head(fword):
    """The idempotent that must follow the leading resolvent run, and the
    sandwich convention of the side: (head_atom or None, sandwiched)."""
    if fword == (SE, K(2)):
        return SE, False
    if fword == (DE, K(2), DE):
        return DE, True
    if fword == ():
        return None, False
    raise PipelineError(f"no rearrangement pattern for leading factor {fword!r}")


def _serialize(word):
    from .emit import emit_text
    return emit_text(Expr([(word, Scalar.one())]))


def rearrange(t: RadialIntegrand) -> Expr:
    """Replace each radial integral by its modular-operator normal form.

    Every term must be [b0^P, head, rho..., b0^1, rest...] with u-power P-1,
    or the all-left form [b0^P, head, rho...] with u-power P-2 (one resolvent
    splits off cyclically inside the trace).  Output words contain D_m
    factors and no resolvents and no radial variable.
    """
    out = Expr.zero()
    for coef, s, word in t.terms:
        if not word or not isinstance(word[0], B0Node):
            raise PipelineError(f"pattern mismatch (no leading resolvent): "
                                f"{_serialize(word)}")
        lead = word[0]
        head, sandwiched = _side_head(lead.fword)
        if lead.fcoef != 1:
            raise PipelineError("pattern mismatch: scaled leading factor")
        interior = [j for j in range(1, len(word))
                    if isinstance(word[j], B0Node)]
        if len(interior) > 1:
            raise PipelineError(f"pattern mismatch (multiple interior "
                                f"resolvents): {_serialize(word)}")
        if interior:
            j = interior[0]
            node = word[j]
            if node.power != 1 or node.fword != lead.fword:
                raise PipelineError(f"pattern mismatch (interior resolvent): "
                                    f"{_serialize(word)}")
            m = lead.power - 1
            content = word[1:j]
            rest = word[j + 1:]
        else:
            m = lead.power - 2
            content = word[1:]
            rest = ()
        if m < 0 or s != m:
            raise PipelineError(
                f"pattern mismatch (u^{s} against resolvent run "
                f"{lead.power}): {_serialize(word)}")
        if head is not None:
            if not content or content[0] != head:
                raise PipelineError(f"pattern mismatch (missing twisted "
                                    f"idempotent): {_serialize(word)}")
            rho = content[1:]
        else:
            rho = content
        arg = Expr.word(K(-(2 * m + 2))) if m >= 0 else Expr.one()
        head_expr = Expr.word(head) if head is not None else Expr.one()
        arg = arg * head_expr * Expr.word(*rho) * head_expr
        node_expr = Expr.zero()
        for aw, ac in arg.items():
            node_expr = node_expr + Expr([( (DmNode(m, aw),), ac )])
        piece = head_expr * node_expr
        if sandwiched:
            piece = piece * head_expr
        piece = piece * Expr.word(*rest)
        out = out + piece * coef
    return out


# ---------------------------------------------------------------------------
# stage 5: cyclic canonicalization
# ---------------------------------------------------------------------------


def _cyclic_reps(word):
    """All normalized rotations reachable from a trace word (rotating can
    enable further local rewrites, so iterate to closure)."""
    seen = {}
    frontier = [word]
    while frontier:
        w = frontier.pop()
        k = word_key(w)
        if k in seen:
            continue
        seen[k] = w
        for j in range(1, len(w) + 1):
            r = normalize_word(_rotate(w, j % len(w))) if w else w
            if r is not None and word_key(r) not in seen:
                frontier.append(r)
    return seen


def cyclic_canonicalize(a: Expr) -> Expr:
    """Rotate every trace word to its minimal cyclic representative."""
    out = []
    for word, coef in a.items():
        if not word:
            out.append((word, coef))
            continue
        reps = _cyclic_reps(word)
        key = min(reps)
        out.append((reps[key], coef))
    return Expr(out)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def pipeline_symbol(side: str) -> Symbol:
    if side == "minus":
        return symbol_L_minus()
    if side == "plus":
        return symbol_L_plus()
    raise ValueError("side must be 'minus' or 'plus'")


def b2_symbol(side: str) -> Symbol:
    sym = pipeline_symbol(side)
    bs = parametrix(sym, 2, tag="b0m" if side == "minus" else "b0p")
    return set_lambda_minus_one(bs[2])


class StageTrace:
    """All intermediate stage results of one a2 computation (for checks,
    dumps, and counting diagnostics)."""

    def __init__(self, side):
        self.side = side
        self.b2 = None
        self.angular = None
        self.rotated = None
        self.ibp = None
        self.rearranged = None
        self.canonical = None


def a2_trace(side: str, stages: StageTrace | None = None) -> Expr:
    """tau(a2) for the requested side, as a modular-form trace argument.

    a2 = -integral of b2(xi, -1), so tau(a2) = -1/2 sum_terms int ... du after
    the angular step (the 1/2 is the u = r^2 substitution); the 2 pi from the
    angular moments and the leading sign stay in the exact coefficients."""
    st = stages if stages is not None else StageTrace(side)
    st.b2 = b2_symbol(side)
    st.angular = angular_integrate(st.b2)
    st.rotated = leftmost_b0_normalize(st.angular)
    st.ibp = ibp_reduce(st.rotated)
    st.rearranged = rearrange(st.ibp) * Scalar.of(Fraction(-1, 2))
    st.canonical = cyclic_canonicalize(st.rearranged)
    return st.canonical


def index_expression() -> Expr:
    """tau-argument of a2(L+) - a2(L-), cyclically canonicalized."""
    return cyclic_canonicalize(a2_trace("plus") - a2_trace("minus"))


def flat_reduce(a: Expr) -> Expr:
    """k -> 1: twists vanish, derivatives of k die, D_m collapses to its
    value 1/(m+1) at the identity."""
    from .ncalg import flat_expr
    return cyclic_canonicalize(flat_expr(a))


def chern_expression() -> Expr:
    """2 pi i (e d1(e) d2(e) - e d2(e) d1(e)) as a trace argument."""
    E = Atom("e")
    d1e = Atom("e", deltas=(1,))
    d2e = Atom("e", deltas=(2,))
    val = Expr.word(E, d1e, d2e) - Expr.word(E, d2e, d1e)
    return cyclic_canonicalize(val * Scalar.of(0, 2, 1))
