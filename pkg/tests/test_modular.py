import math
import random

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nctindex.modular import Lm_closed, Lm_quad, matrix_Lm

U_GRID = [0.1, 0.5, 1 - 1e-6, 1.0, 1 + 1e-6, 2.0, 10.0, 100.0]


def test_closed_vs_quadrature_grid():
    for m in range(4):
        for u in U_GRID:
            assert abs(Lm_quad(m, u, 1e-12) - Lm_closed(m, u)) < 1e-10


def test_m0_is_log_over_um1():
    for u in (0.3, 2.0, 7.5):
        assert_allclose(Lm_closed(0, u), math.log(u) / (u - 1), rtol=1e-13)


def test_value_at_one():
    for m in range(6):
        assert abs(Lm_closed(m, 1.0) - 1.0 / (m + 1)) < 1e-12
        assert abs(Lm_quad(m, 1.0) - 1.0 / (m + 1)) < 1e-10


def test_quad_unit_case():
    # int dx/(x+1)^2 = 1
    assert_allclose(Lm_quad(0, 1.0), 1.0, atol=1e-12)


def test_m1_u2_closed_value():
    # closed form at m=1, u=2: -(log 2 - 1)
    expected = -(math.log(2.0) - 1.0)
    assert_allclose(Lm_closed(1, 2.0), expected, rtol=1e-13)
    assert abs(Lm_quad(1, 2.0, 1e-12) - expected) < 1e-10


def test_branch_continuity_near_one():
    for m in range(4):
        for du in np.linspace(-1e-4, 1e-4, 21):
            u = 1.0 + du
            assert abs(Lm_closed(m, u) - Lm_quad(m, u, 1e-13)) < 1e-9


def test_monotone_decreasing_in_u():
    for m in range(4):
        vals = [Lm_quad(m, u) for u in np.linspace(0.2, 8.0, 25)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_domain_errors():
    with pytest.raises(ValueError):
        Lm_closed(1, 0.0)
    with pytest.raises(ValueError):
        Lm_closed(1, -2.0)
    with pytest.raises(ValueError):
        Lm_quad(0, -1.0)


def test_matrix_identity():
    for m in range(3):
        got = matrix_Lm(m, np.eye(5))
        assert_allclose(got, np.eye(5) / (m + 1), atol=1e-12)


def test_matrix_diagonal():
    us = np.array([0.5, 1.0, 2.0, 3.0])
    got = matrix_Lm(0, np.diag(us))
    want = np.diag([Lm_closed(0, u) for u in us])
    assert_allclose(got, want, atol=1e-12)


def test_matrix_commutes_with_argument():
    rng = np.random.default_rng(5)
    d = np.diag(rng.uniform(0.5, 2.0, size=8))
    s = rng.normal(size=(8, 8))
    a = np.linalg.solve(s, d @ s)
    f = matrix_Lm(1, a)
    assert np.linalg.norm(f @ a - a @ f) < 1e-10


def test_matrix_similarity_covariance():
    rng = np.random.default_rng(6)
    for _ in range(5):
        d = np.diag(rng.uniform(0.3, 3.0, size=6))
        s = rng.normal(size=(6, 6)) + np.eye(6) * 2
        a = np.linalg.solve(s, d @ s)
        lhs = matrix_Lm(2, a)
        rhs = np.linalg.solve(s, matrix_Lm(2, d) @ s)
        assert np.linalg.norm(lhs - rhs) < 1e-8


def test_matrix_rejects_negative_spectrum():
    with pytest.raises(ArithmeticError):
        matrix_Lm(1, -np.eye(3))
