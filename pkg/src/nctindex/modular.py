"""The modified-logarithm family L_m and its operator calculus.

L_m(u) = int_0^inf x^m/(x+1)^(m+1) * 1/(xu+1) dx
       = (-1)^m (u-1)^(-(m+1)) (log u - sum_{j=1}^m (-1)^(j+1) (u-1)^j / j)

for u > 0.  The closed form has a removable singularity at u = 1 with value
1/(m+1); near u = 1 we switch to the Taylor series

    L_m(u) = sum_{j>=0} (-1)^j (u-1)^j / (m+1+j),

since the closed form loses all precision from the (u-1)^-(m+1) blowup.

D_m = L_m(Delta) is evaluated spectrally: eigendecomposition of the modular
superoperator, L_m on the eigenvalues, recomposition.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.integrate
import scipy.linalg

BRANCH_RADIUS = 1e-3
SERIES_DEGREE = 12


def Lm_closed(m: int, u: float) -> float:
    """Closed form of L_m(u), u > 0, series branch near u = 1."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if u <= 0:
        raise ValueError("domain: u must be positive")
    t = u - 1.0
    if abs(t) < BRANCH_RADIUS:
        return sum((-t) ** j / (m + 1 + j) for j in range(SERIES_DEGREE + 1))
    acc = math.log(u)
    for j in range(1, m + 1):
        acc -= (-1) ** (j + 1) * t**j / j
    return (-1) ** m * t ** (-(m + 1)) * acc


def Lm_quad(m: int, u: float, tol: float = 1e-12) -> float:
    """Adaptive quadrature of the defining integral; the independent oracle.

    The substitution x = t/(1-t) maps [0, inf) to [0, 1); all (1-t) powers
    cancel exactly and the integrand becomes the smooth bounded function
    t^m / (t u + 1 - t).
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if u <= 0:
        raise ValueError("domain: u must be positive")
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    def f(t):
        return t**m / (t * u + 1.0 - t)

    val, err = scipy.integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol,
                                    limit=200)
    if err > max(100 * tol, 1e-9 * abs(val)):
        raise ArithmeticError(f"non-convergent: estimated error {err}")
    return val


def matrix_Lm(m: int, delta: np.ndarray, imag_tol: float = 1e-8) -> np.ndarray:
    """L_m applied spectrally to a superoperator with positive real spectrum."""
    delta = np.asarray(delta)
    vals, vecs = scipy.linalg.eig(delta)
    if np.any(np.abs(vals.imag) > imag_tol * max(1.0, np.abs(vals.real).max())) \
            or np.any(vals.real <= 0):
        raise ArithmeticError("spectrum not positive-real")
    fvals = np.array([Lm_closed(m, v) for v in vals.real])
    return vecs @ np.diag(fvals) @ np.linalg.inv(vecs)
