"""Numeric cross-checks of the radial pipeline, stage by stage.

Each stage evaluator computes the same quantity tau(a2) from that stage's
representation, with the symbolic scalars expanded numerically and the
resolvents computed by dense solves:

  stage "b2":        -int_{R^2} tau(b2(xi, -1)) dxi       (polar quadrature,
                     numeric trapezoid moments in the angle)
  stage "angular":   -1/2 sum_T int_0^inf u^s tau(T(u)) du
  stage "rotated":   same, after the trace rotations
  stage "ibp":       same, after the interior-resolvent reduction
  stage "final":     tau(rearranged expression)            (no integral left)

Agreement of consecutive stages validates every bookkeeping constant; the
step from "ibp" to "final" additionally probes the modular-operator form of
the radial integrals, which carries the second-order-in-h defect analyzed in
the numeric module.

Evaluation is organized around cached multiplication matrices: per radius u
there is one dense solve per resolvent kind, and each term costs a handful
of cached matrix-vector products.
"""

from __future__ import annotations

import numpy as np

from .heat import RadialIntegrand, StageTrace, angular_moment
from .ncalg import Atom, B0Node, DmNode, Expr
from .numeric import (Binding, left_mult_matrix, radial_quad, trace, unit)
from .scalars import Scalar
from .symbols import Symbol


class WordEvaluator:
    """Fast trace evaluation of resolvent-bearing words at radii u."""

    def __init__(self, binding: Binding):
        self.b = binding
        self.p = binding.params
        self._seg_l: dict = {}
        self._fmat: dict = {}
        self._unit = unit(self.p).flatten()

    def _segment_matrix(self, seg) -> np.ndarray:
        from .ncalg import word_key
        key = word_key(seg)
        if key not in self._seg_l:
            from .numeric import eval_expr
            val = eval_expr(self.b, Expr([(seg, Scalar.one())]))
            self._seg_l[key] = left_mult_matrix(self.p, val)
        return self._seg_l[key]

    def _f_matrix(self, node: B0Node) -> np.ndarray:
        key = node._key()[1:3]  # fword, fcoef
        if key not in self._fmat:
            from .numeric import eval_expr
            F = eval_expr(self.b, Expr([(node.fword, Scalar.of(node.fcoef))]))
            self._fmat[key] = left_mult_matrix(self.p, F)
        return self._fmat[key]

    def split(self, word):
        """[(kind, payload)] with kind in {'seg', 'b0'}."""
        parts = []
        seg = []
        for f in word:
            if isinstance(f, B0Node):
                if seg:
                    parts.append(("seg", tuple(seg)))
                    seg = []
                parts.append(("b0", f))
            else:
                seg.append(f)
        if seg:
            parts.append(("seg", tuple(seg)))
        return parts

    def resolvent_matrices(self, words, u: float) -> dict:
        """One dense inverse per distinct resolvent kind at this radius."""
        kinds = {}
        for w in words:
            for f in w:
                if isinstance(f, B0Node):
                    kinds[f._key()[1:3]] = f
        out = {}
        eye = np.eye(self.p.dim)
        for key, node in kinds.items():
            if not node.lam_minus_one:
                raise ValueError("resolvent still carries lam")
            out[key] = np.linalg.inv(u * self._f_matrix(node) + eye)
        return out

    def term_trace(self, parts, u: float, res: dict) -> complex:
        v = self._unit
        for kind, payload in reversed(parts):
            if kind == "seg":
                v = self._segment_matrix(payload) @ v
            else:
                Lb = res[payload._key()[1:3]]
                for _ in range(payload.power):
                    v = Lb @ v
        return complex(v[(self.p.dim - 1) // 2])


def _prepare_terms(t: RadialIntegrand, ev: WordEvaluator):
    return [(coef.to_complex(), s, ev.split(word), word)
            for coef, s, word in t.terms]


def tau_radial(binding: Binding, t: RadialIntegrand, tol: float = 1e-8,
               U: float = 2.0e5) -> complex:
    """-1/2 sum int u^s tau(word(u)) du."""
    ev = WordEvaluator(binding)
    prepared = _prepare_terms(t, ev)
    words = [w for _, _, w in t.terms]

    def f(u):
        res = ev.resolvent_matrices(words, u)
        acc = 0.0 + 0.0j
        for c, s, parts, _ in prepared:
            acc += c * (u ** s) * ev.term_trace(parts, u, res)
        return np.array(acc)

    val = radial_quad(f, tol=tol, U=U)
    return -0.5 * complex(val)


def tau_symbol_2d(binding: Binding, sym: Symbol, n_theta: int = 64,
                  tol: float = 1e-8, U: float = 2.0e5) -> complex:
    """-int tau(sym(xi)) dxi via polar coordinates.

    The angular moments are computed by numeric trapezoid quadrature (exact
    up to rounding for trigonometric polynomials at this node count), making
    this an independent check of the exact-moment table used by the angular
    stage; the word traces are radius-only and shared across angles.
    """
    thetas = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    moments = {}
    word_monos: dict = {}
    ev = WordEvaluator(binding)
    words = []
    for (a, b, c), e in sym.items():
        if c:
            raise ValueError("expected lam = -1 symbol")
        if (a, b) not in moments:
            moments[(a, b)] = (np.cos(thetas) ** a * np.sin(thetas) ** b
                               ).sum() * (2 * np.pi / n_theta)
        for word, coef in e.items():
            key = len(words)
            from .ncalg import word_key
            k = word_key(word)
            if k not in word_monos:
                word_monos[k] = (ev.split(word), [])
                words.append(word)
            word_monos[k][1].append((coef.to_complex() * moments[(a, b)],
                                     (a + b) // 2 if (a + b) % 2 == 0 else None,
                                     a + b))
    prepared = list(word_monos.values())

    def f(u):
        res = ev.resolvent_matrices(words, u)
        acc = 0.0 + 0.0j
        for parts, monos in prepared:
            tw = None
            for cmom, s, deg in monos:
                if abs(cmom) < 1e-18:
                    continue
                if tw is None:
                    tw = ev.term_trace(parts, u, res)
                # r^deg * r dr = u^{deg/2} du / 2  (deg odd never survives
                # the angle integral beyond rounding)
                acc += cmom * (u ** (deg / 2.0)) * tw / 2.0
        return np.array(acc)

    val = radial_quad(f, tol=tol, U=U)
    return -complex(val)


def tau_final(binding: Binding, expr: Expr) -> complex:
    from .numeric import eval_expr
    return complex(trace(binding.params, eval_expr(binding, expr)))


def stage_values(binding: Binding, stages: StageTrace,
                 which=("b2", "angular", "rotated", "ibp", "final"),
                 tol: float = 1e-8) -> dict:
    out = {}
    for name in which:
        if name == "b2":
            out[name] = tau_symbol_2d(binding, stages.b2, tol=tol)
        elif name == "angular":
            out[name] = tau_radial(binding, stages.angular, tol=tol)
        elif name == "rotated":
            out[name] = tau_radial(binding, stages.rotated, tol=tol)
        elif name == "ibp":
            out[name] = tau_radial(binding, stages.ibp, tol=tol)
        elif name == "final":
            out[name] = tau_final(binding, stages.canonical)
    return out
