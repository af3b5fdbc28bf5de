"""Special functions behind the SIR distributions.

The interference kernel

    D(A, B) = 2A/(B-2) * 2F1(1, 1 - 2/B; 2 - 2/B; -A)

is never evaluated through a general hypergeometric routine. It is
computed from its integral form

    D(A, B) = A**(2/B) * int_{A**(-2/B)}^inf dv / (1 + v**(B/2))

with adaptive Gauss-Kronrod quadrature (QUADPACK through scipy).
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

EPSABS = 1e-14
EPSREL = 1e-11


def _check_beta(beta: float) -> None:
    if not beta > 2:
        raise DomainError(f"pathloss exponent must satisfy beta > 2, got {beta}")


def arccot(x):
    """Inverse cotangent on [0, inf), with arccot(0) = pi/2."""
    return np.arctan2(1.0, x)


def _quad(f, a, b, **kw):
    val, err = integrate.quad(f, a, b, epsabs=EPSABS, epsrel=EPSREL, limit=400, **kw)
    if not np.isfinite(val) or err > max(1e-12, 1e-9 * abs(val)):
        raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: err={err:.3g}")
    return val


def _tail_quad(y: float, beta: float) -> float:
    """``int_y^inf dv / (1 + v**b)`` with ``b = beta/2`` by quadrature."""
    b = beta / 2.0
    total = 0.0
    if y < 1.0:
        total += _quad(lambda v: 1.0 / (1.0 + v ** b), y, 1.0)
        y = 1.0
    # v = Y * w**(-1/(b-1)) maps [Y, inf) onto (0, 1] with a bounded integrand
    p = b / (b - 1.0)
    yb = y ** b
    total += y / (b - 1.0) * _quad(lambda w: 1.0 / (yb + w ** p), 0.0, 1.0)
    return total


def d_function(A: float, B: float) -> float:
    """Interference kernel ``D(A, B)`` evaluated by quadrature.

    Parameters
    ----------
    A : float
        Nonnegative argument (a product of threshold and geometry terms).
    B : float
        Pathloss exponent, ``B > 2``.

    Returns
    -------
    float
        ``D(A, B) >= 0``; nondecreasing in ``A``.

    Raises
    ------
    DomainError
        If ``B <= 2`` or ``A < 0``.
    """
    _check_beta(B)
    if A < 0:
        raise DomainError(f"D(A, B) needs A >= 0, got {A}")
    if A == 0:
        return 0.0
    e = 2.0 / B
    return A ** e * _tail_quad(A ** (-e), B)


def d_function_beta4(xi):
    """Closed form ``D(xi, 4) = sqrt(xi) * arccot(1/sqrt(xi))``; array friendly."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise DomainError("D(xi, 4) needs xi >= 0")
    root = np.sqrt(xi_arr)
    out = root * np.arctan(root)  # arccot(1/t) == atan(t) for t >= 0
    return float(out) if out.ndim == 0 else out


def a_function(y: float, beta: float) -> float:
    """``int_y^inf dv / (1 + v**(beta/2))``; equals arccot(y) when beta == 4."""
    _check_beta(beta)
    if y < 0:
        raise DomainError(f"lower limit must be nonnegative, got {y}")
    if beta == 4:
        return float(arccot(y))
    return _tail_quad(float(y), beta)


def d_eval(A, beta: float):
    """Vectorised ``D``: closed form at beta == 4, quadrature otherwise."""
    _check_beta(beta)
    if beta == 4:
        return d_function_beta4(A)
    arr = np.asarray(A, dtype=float)
    out = np.vectorize(lambda a: d_function(a, beta), otypes=[float])(arr)
    return float(out) if out.ndim == 0 else out


def d_scaled_derivatives(A: float, beta: float, order: int) -> np.ndarray:
    """Return ``[A**j * D^(j)(A) for j in 0..order]``.

    Differentiates ``D(A) = 2 int_1^inf t A / (A + t**beta) dt`` under the
    integral sign, so every order is a smooth, absolutely convergent
    integral rather than a finite difference.
    """
    _check_beta(beta)
    if A < 0:
        raise DomainError(f"A must be nonnegative, got {A}")
    out = np.zeros(order + 1)
    out[0] = d_function(A, beta) if beta != 4 else d_function_beta4(A)
    if A == 0:
        return out
    for j in range(1, order + 1):
        sign = (-1.0) ** (j + 1)
        fact = math.factorial(j)

        def f(t, j=j):
            tb = t ** beta
            return t * tb * A ** j / (A + tb) ** (j + 1)

        out[j] = 2.0 * sign * fact * _quad(f, 1.0, np.inf)
    return out


def laplace_interference(s: float, r: float, lam: float, beta: float) -> float:
    """Laplace transform of the out-of-cluster interference beyond radius ``r``.

    ``L(s) = exp(-pi * lam * r**2 * D(s / r**beta, beta))`` for unit-mean
    exponential fading and a PPP of density ``lam`` outside the disc.
    """
    _check_beta(beta)
    if s < 0 or lam < 0:
        raise DomainError("s and lam must be nonnegative")
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if s == 0:
        return 1.0
    return math.exp(-math.pi * lam * r * r * d_eval(s / r ** beta, beta))
