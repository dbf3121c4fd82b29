import random
from fractions import Fraction

import pytest

from nctindex.ncalg import (
    Atom, B0Node, DmNode, Expr, K, SE, DE, E,
    apply_delta, apply_twist, dm, flat_expr, normalize_word,
)
from nctindex.parser import parse_expr
from nctindex.scalars import Scalar


def w(*factors):
    return Expr.word(*factors)


# -- basic rewrites ---------------------------------------------------------

def test_idempotent_collapse():
    assert w(SE) * w(SE) == w(SE)
    assert w(E) * w(E) * w(E) == w(E)
    assert w(DE) * w(DE) == w(DE)


def test_distinct_twists_do_not_collapse():
    assert w(SE) * w(E) != w(SE)
    assert len((w(SE) * w(E)).items()[0][0]) == 2


def test_k_power_merge():
    assert w(K(2)) * w(K(-1)) == w(K(1))
    assert w(K(3)) * w(K(-3)) * w(SE) == w(SE)
    assert w(K(2)) * w(K(-2)) == Expr.one()


def test_noncommutativity_preserved():
    assert w(SE) * w(K(2)) != w(K(2)) * w(SE)


def test_cancellation():
    x = w(SE, K(2))
    assert x * 2 - x * 2 == Expr.zero()


def test_zero_scalar_terms_absent():
    assert (w(SE) * 0).is_zero()


# -- derivations ------------------------------------------------------------

def test_leibniz_on_product():
    lhs = apply_delta(1, w(SE) * w(K(1)))
    rhs = apply_delta(1, w(SE)) * w(K(1)) + w(SE) * apply_delta(1, w(K(1)))
    assert lhs == rhs


def test_delta_of_unit():
    assert apply_delta(2, Expr.one()).is_zero()


def test_delta_order_canonical():
    a = apply_delta(1, apply_delta(2, w(K(1))))
    b = apply_delta(2, apply_delta(1, w(K(1))))
    assert a == b
    atom = a.items()[0][0][0]
    assert atom.deltas == (1, 2)


def test_delta_expands_k_squared():
    got = apply_delta(1, w(K(2)))
    dk = Atom("k", kexp=1, deltas=(1,))
    assert got == w(dk, K(1)) + w(K(1), dk)


def test_delta_expands_k_inverse():
    got = apply_delta(1, w(K(-1)))
    dk = Atom("k", kexp=1, deltas=(1,))
    assert got == Expr([( (K(-1), dk, K(-1)), Scalar.of(-1) )])
    # check against d(k k^-1) = 0
    total = apply_delta(1, w(K(1))) * w(K(-1)) + w(K(1)) * got
    assert total.is_zero()


# -- twists -----------------------------------------------------------------

def test_twist_fixes_k():
    assert apply_twist(1, w(K(2))) == w(K(2))


def test_twist_composition():
    assert apply_twist(1, apply_twist(1, w(E))) == w(DE)
    assert apply_twist(-1, w(SE)) == w(E)


def test_twist_homomorphism_random():
    rng = random.Random(7)
    pool = [E, SE, K(1), K(-2), Atom("e", deltas=(1,), twist=1),
            Atom("k", kexp=1, deltas=(2,))]
    for _ in range(200):
        a = w(*[rng.choice(pool) for _ in range(rng.randint(1, 4))])
        b = w(*[rng.choice(pool) for _ in range(rng.randint(1, 4))])
        s = rng.randint(-2, 3)
        assert apply_twist(s, a * b) == apply_twist(s, a) * apply_twist(s, b)


# -- associativity property --------------------------------------------------

def rand_expr(rng, npool=None):
    pool = npool or [E, SE, DE, K(1), K(-1), K(2),
                     Atom("e", deltas=(1,), twist=1),
                     Atom("k", kexp=1, deltas=(1,))]
    terms = []
    for _ in range(rng.randint(1, 3)):
        word = tuple(rng.choice(pool) for _ in range(rng.randint(0, 4)))
        coef = Scalar.of(Fraction(rng.randint(-3, 3), rng.randint(1, 3)),
                         Fraction(rng.randint(-2, 2)), rng.randint(-1, 1))
        terms.append((word, coef))
    return Expr(terms)


def test_mul_associative_random():
    rng = random.Random(11)
    for _ in range(300):
        a, b, c = rand_expr(rng), rand_expr(rng), rand_expr(rng)
        assert (a * b) * c == a * (b * c)


def _boundary_collapses(a, b):
    # the derivation is defined on normal forms: when a*b merges idempotent
    # atoms across the product boundary, Leibniz holds only modulo the derived
    # idempotent relation (checked numerically in the torus backend instead)
    for wa, _ in a.items():
        for wb, _ in b.items():
            if wa and wb and normalize_word(wa + wb) != wa + wb:
                return True
    return False


def test_leibniz_random():
    rng = random.Random(13)
    checked = 0
    for _ in range(600):
        a, b = rand_expr(rng), rand_expr(rng)
        if _boundary_collapses(a, b):
            continue
        checked += 1
        for i in (1, 2):
            lhs = apply_delta(i, a * b)
            rhs = apply_delta(i, a) * b + a * apply_delta(i, b)
            assert lhs == rhs
    assert checked > 200


def test_normalize_idempotent_random():
    rng = random.Random(17)
    for _ in range(300):
        a = rand_expr(rng)
        assert Expr(a.items()) == a


# -- resolvent factors -------------------------------------------------------

def FMINUS():
    return (SE, K(2))


def test_b0_merges_and_commutes_past_leading_factor():
    b0 = B0Node(FMINUS(), 1, tag="b0m")
    b2 = B0Node(FMINUS(), 2, tag="b0m")
    assert w(b0) * w(b2) == w(B0Node(FMINUS(), 3, tag="b0m"))
    # s(e) k^2 b0  ->  b0 s(e) k^2
    lhs = w(SE, K(2), b0)
    rhs = w(b0, SE, K(2))
    assert lhs == rhs


def test_b0_plus_commutes_with_delta_e():
    fplus = (DE, K(2), DE)
    b0 = B0Node(fplus, 2, tag="b0p")
    assert w(DE, b0) == w(b0, DE)


def test_b0_minus_does_not_commute_with_sigma_e():
    b0 = B0Node(FMINUS(), 1, tag="b0m")
    assert w(SE, b0) != w(b0, SE)


def test_delta_on_b0_rejected_in_plain_expr():
    b0 = B0Node(FMINUS(), 1, tag="b0m")
    with pytest.raises(ValueError):
        apply_delta(1, w(b0))


# -- D_m nodes ---------------------------------------------------------------

def test_dm_distributes_over_argument():
    arg = w(SE) * 2 + w(K(1))
    node = dm(1, arg)
    assert len(node) == 2
    assert node == dm(1, w(SE)) * 2 + dm(1, w(K(1)))


def test_dm_rejects_resolvent_argument():
    b0 = B0Node(FMINUS(), 1, tag="b0m")
    with pytest.raises(ValueError):
        DmNode(1, (b0,))


def test_dm_twist_moves_into_argument():
    node = dm(1, w(E))
    assert apply_twist(2, node) == dm(1, w(DE))


# -- flat substitution -------------------------------------------------------

def test_flat_reduces_twists_and_kills_k():
    de1 = Atom("e", deltas=(1,), twist=1)
    x = w(SE, K(2), de1)
    flat = flat_expr(x)
    assert flat == w(E, Atom("e", deltas=(1,)))


def test_flat_kills_delta_k():
    dk = Atom("k", kexp=1, deltas=(1,))
    assert flat_expr(w(SE, dk)).is_zero()


def test_flat_dm_scales():
    node = dm(1, w(K(-4), SE))
    got = flat_expr(w(SE) * node)
    assert got == Expr([((E, E), Scalar.of(Fraction(1, 2)))])
    assert got == Expr([((E,), Scalar.of(Fraction(1, 2)))])


# -- round trip through text --------------------------------------------------

def test_parse_examples():
    assert parse_expr("e e") == w(E)
    assert parse_expr("s(e) k^2 s(e) k") == w(SE, K(2), SE, K(1))
    assert parse_expr("k^3 k^-3 s(e)") == w(SE)
    assert parse_expr("2 s(e) - 2 s(e)").is_zero()
    assert parse_expr("d1(s(e) k)") == apply_delta(1, w(SE, K(1)))


def test_parse_emit_roundtrip_random():
    from nctindex.emit import emit_text
    rng = random.Random(23)
    for _ in range(1000):
        x = rand_expr(rng)
        if rng.random() < 0.3:
            x = x + dm(rng.randint(0, 3), rand_expr(rng))
        assert parse_expr(emit_text(x)) == x
