"""Analytical SIR distributions for coordinated beamforming.

All functions accept a scalar threshold or an array of thresholds
(linear scale) and return probabilities of the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special, stats

from .errors import (DerivativeInstabilityError, DomainError, QuadratureError,
                     UnsupportedOrderError)
from .specfun import a_function, d_eval, d_scaled_derivatives

SERIES_MAX_ORDER = 3
CURVE_KINDS = ("exact", "upper_bound", "lower_bound", "approximation",
               "expansion", "empirical")


@dataclass(frozen=True)
class ClusterConfig:
    """Cluster parameters shared by every formula.

    Parameters
    ----------
    K : int
        Cluster cardinality, ``1 <= K <= nt``.
    nt : int
        Antennas per base station.
    beta : float
        Pathloss exponent, ``beta > 2``.
    delta1 : float, optional
        Nearest-to-Kth distance ratio in ``(0, 1]``. Forced to 1 when
        ``K == 1``. Derived as ``sqrt(c / K)`` when only ``c`` is given.
    c : float, optional
        Geometry constant with ``0 < c <= K``.
    """

    K: int
    nt: int
    beta: float = 4.0
    delta1: Optional[float] = None
    c: Optional[float] = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K}")
        if int(self.nt) != self.nt or self.nt < self.K:
            raise DomainError(f"zero forcing needs nt >= K, got nt={self.nt}, K={self.K}")
        if not self.beta > 2:
            raise DomainError(f"pathloss exponent must satisfy beta > 2, got {self.beta}")
        if self.c is not None:
            if not 0 < self.c <= self.K:
                raise DomainError(f"geometry constant needs 0 < c <= K, got c={self.c}")
            if self.delta1 is None:
                object.__setattr__(self, "delta1", math.sqrt(self.c / self.K))
        if self.K == 1:
            object.__setattr__(self, "delta1", 1.0)
        if self.delta1 is not None and not 0 < self.delta1 <= 1:
            raise DomainError(f"delta1 must lie in (0, 1], got {self.delta1}")

    @property
    def order(self) -> int:
        """Half the chi-squared degrees of freedom of the desired gain."""
        return self.nt - self.K + 1

    @property
    def kappa(self) -> float:
        return alzer_kappa(self.order)

    def with_delta1(self, delta1: Optional[float]) -> "ClusterConfig":
        return ClusterConfig(self.K, self.nt, self.beta, delta1, None)


@dataclass
class SirCcdfCurve:
    """A CCDF sampled on a grid of linear SIR thresholds."""

    gamma: np.ndarray
    values: np.ndarray
    kind: str
    config: Optional[ClusterConfig] = None
    ci_halfwidth: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.gamma.shape != self.values.shape:
            raise ValueError("gamma and values must have the same shape")

    @property
    def gamma_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.gamma)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _as_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise DomainError("SIR threshold must be nonnegative")
    return g


def _ret(x):
    x = np.clip(x, 0.0, 1.0)
    return float(x) if np.ndim(x) == 0 else x


def alzer_kappa(M: int) -> float:
    """``(M!)**(-1/M)``, the scale in the Alzer lower bound on a Gamma(M) CDF."""
    if M < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    return math.exp(-special.gammaln(M + 1) / M)


def alzer_bounds(M: int, x):
    """``((1 - exp(-kappa x))**M, (1 - exp(-x))**M)``, which bracket the Gamma(M, 1) CDF."""
    x = np.asarray(x, dtype=float)
    lo = (-np.expm1(-alzer_kappa(M) * x)) ** M
    hi = (-np.expm1(-x)) ** M
    return lo, hi


def _alternating_sum(M: int, scale: float, a, K: int, beta: float):
    """sum_l C(M,l) (-1)^(l+1) / [1 + D(l * scale * a)]^K."""
    total = 0.0
    for ell in range(1, M + 1):
        coef = math.comb(M, ell) * (-1.0) ** (ell + 1)
        total = total + coef / (1.0 + d_eval(ell * scale * a, beta)) ** K
    return total


def ccdf_conditional_bounds(cfg: ClusterConfig, gamma):
    """Lower and upper bounds on the CCDF of the SIR given ``delta1``.

    The upper bound uses the Alzer scale ``kappa``; the lower bound sets it
    to one. They coincide when ``K == nt``.

    Returns
    -------
    (lower, upper)
    """
    if cfg.delta1 is None:
        raise DomainError("conditional bounds need delta1")
    g = _as_gamma(gamma)
    a = cfg.delta1 ** cfg.beta * g
    upper = _alternating_sum(cfg.order, cfg.kappa, a, cfg.K, cfg.beta)
    lower = _alternating_sum(cfg.order, 1.0, a, cfg.K, cfg.beta)
    return _ret(lower), _ret(upper)


def ccdf_conditional_exact(cfg: ClusterConfig, gamma):
    """Exact conditional CCDF ``1 / [1 + D(delta1**beta * gamma)]**K`` for ``K == nt``."""
    if cfg.K != cfg.nt:
        raise DomainError(f"exact conditional CCDF needs K == nt, got K={cfg.K}, nt={cfg.nt}")
    if cfg.delta1 is None:
        raise DomainError("conditional CCDF needs delta1")
    g = _as_gamma(gamma)
    return _ret(1.0 / (1.0 + d_eval(cfg.delta1 ** cfg.beta * g, cfg.beta)) ** cfg.K)


def _exp_derivatives(u_derivs: np.ndarray) -> np.ndarray:
    """Derivatives of ``exp(u)`` from those of ``u`` (Faa di Bruno recursion).

    ``u_derivs[j]`` holds u^(j) for j >= 1 (index 0 unused); returns
    f^(n) / f for n = 0..len-1.
    """
    n_max = len(u_derivs) - 1
    f = np.zeros(n_max + 1)
    f[0] = 1.0
    for n in range(1, n_max + 1):
        f[n] = sum(math.comb(n - 1, k) * u_derivs[k + 1] * f[n - 1 - k] for k in range(n))
    return f


def _series_at_lambda(cfg: ClusterConfig, g: float, lam: float, dscaled: np.ndarray) -> float:
    K, beta = cfg.K, cfg.beta
    mmax = cfg.nt - cfg.K
    a = cfg.delta1 ** beta * g
    upper = stats.gamma.ppf(1.0 - 1e-10, K)

    def integrand(x):
        r = math.sqrt(x / (math.pi * lam))
        rb = r ** beta
        c = a / rb
        # u(s) = -pi lam r^2 D(c s); u^(j)(s) = -x c^j D^(j)(c s) at s = r^beta
        u = np.zeros(mmax + 1)
        for j in range(1, mmax + 1):
            u[j] = -x * c ** j * (dscaled[j] / a ** j)
        ratios = _exp_derivatives(u)
        base = math.exp(-x * dscaled[0])
        s = 0.0
        for m in range(mmax + 1):
            s += rb ** m / math.factorial(m) * (-1.0) ** m * ratios[m]
        return base * s * stats.gamma.pdf(x, K)

    val, err = integrate.quad(integrand, 0.0, upper, epsabs=1e-12, epsrel=1e-10, limit=200)
    if err > 1e-8:
        raise QuadratureError(f"series CCDF outer integral error {err:.3g}")
    return val


def ccdf_theorem1(cfg: ClusterConfig, gamma, lam: float = 1.0, lam_check: float = 4.0,
                  tol: float = 1e-6):
    """Exact conditional CCDF via the Laplace-transform derivative series.

    Averages over the Kth-neighbour distance with the Gamma(K, 1) law of
    ``pi * lam * r**2`` and evaluates the series at two densities; the
    result is density free, so disagreement signals numerical trouble.

    Raises
    ------
    UnsupportedOrderError
        If ``nt - K > 3``.
    DerivativeInstabilityError
        If the two density evaluations differ by more than ``tol``.
    """
    if cfg.delta1 is None:
        raise DomainError("series CCDF needs delta1")
    if cfg.nt - cfg.K > SERIES_MAX_ORDER:
        raise UnsupportedOrderError(
            f"series order nt-K={cfg.nt - cfg.K} exceeds {SERIES_MAX_ORDER}")
    g_arr = _as_gamma(gamma)
    out = np.empty(g_arr.shape)
    for idx, g in np.ndenumerate(g_arr):
        if g == 0:
            out[idx] = 1.0
            continue
        a = cfg.delta1 ** cfg.beta * g
        dscaled = d_scaled_derivatives(a, cfg.beta, cfg.nt - cfg.K)
        v1 = _series_at_lambda(cfg, g, lam, dscaled)
        v2 = _series_at_lambda(cfg, g, lam_check, dscaled)
        if abs(v1 - v2) > tol:
            raise DerivativeInstabilityError(
                f"density check failed at gamma={g}: {v1} vs {v2}")
        out[idx] = 0.5 * (v1 + v2)
    return _ret(out)


def delta1_pdf(K: int, x):
    """Density ``2(K-1) x (1-x^2)^(K-2)`` of the nearest-to-Kth distance ratio."""
    if K < 2:
        raise DomainError("delta1 has a density only for K >= 2")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise DomainError("delta1 density is supported on [0, 1]")
    out = 2.0 * (K - 1) * xa * (1.0 - xa * xa) ** (K - 2)
    return float(out) if out.ndim == 0 else out


def delta1_cdf(K: int, x):
    """``1 - (1 - x^2)^(K-1)``."""
    xa = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    out = 1.0 - (1.0 - xa * xa) ** (K - 1)
    return float(out) if out.ndim == 0 else out


def delta1_mean(K: int, approximate: bool = False) -> float:
    """Mean of ``delta1``: ``sqrt(pi) Gamma(K) / (2 Gamma(K + 1/2))`` (or ``1/sqrt(K)``)."""
    if K < 1:
        raise DomainError("K must be >= 1")
    if approximate:
        return 1.0 / math.sqrt(K)
    return math.sqrt(math.pi) / 2.0 * math.exp(special.gammaln(K) - special.gammaln(K + 0.5))


def _marginal_bound(cfg: ClusterConfig, g_arr: np.ndarray, scale: float, epsabs: float) -> np.ndarray:
    out = np.empty(g_arr.shape)
    K, beta, M = cfg.K, cfg.beta, cfg.order
    for idx, g in np.ndenumerate(g_arr):
        def f(x, g=g):
            return delta1_pdf(K, x) * _alternating_sum(M, scale, x ** beta * g, K, beta)

        val, err = integrate.quad(f, 0.0, 1.0, epsabs=epsabs, epsrel=1e-10, limit=200)
        if err > 10 * epsabs:
            raise QuadratureError(f"marginal bound integral error {err:.3g}")
        out[idx] = val
    return out


def ccdf_marginal_upper(cfg: ClusterConfig, gamma, epsabs: float = 1e-8):
    """Upper bound of :func:`ccdf_marginal_bounds` alone (exact when ``K == nt``)."""
    g_arr = _as_gamma(gamma)
    if cfg.K == 1:
        return ccdf_conditional_bounds(cfg.with_delta1(1.0), g_arr)[1]
    return _ret(_marginal_bound(cfg, g_arr, cfg.kappa, epsabs))


def ccdf_marginal_bounds(cfg: ClusterConfig, gamma, epsabs: float = 1e-8):
    """Bounds on the CCDF averaged over ``delta1`` by quadrature.

    Returns
    -------
    (lower, upper)
    """
    g_arr = _as_gamma(gamma)
    if cfg.K == 1:
        return ccdf_conditional_bounds(cfg.with_delta1(1.0), g_arr)
    lo = _marginal_bound(cfg, g_arr, 1.0, epsabs)
    if cfg.K == cfg.nt:
        return _ret(lo), _ret(lo.copy())
    up = _marginal_bound(cfg, g_arr, cfg.kappa, epsabs)
    return _ret(lo), _ret(up)


def _approx_sum(M: int, scale: float, g, K: int, beta: float):
    total = 0.0
    for ell in range(1, M + 1):
        coef = math.comb(M, ell) * (-1.0) ** (ell + 1)
        gt = scale * ell * g
        with np.errstate(divide="ignore"):
            p = gt ** (2.0 / beta)
            y = np.sqrt(K) / p
        if beta == 4:
            aval = np.arctan2(1.0, y)
        else:
            aval = np.vectorize(lambda yy: a_function(yy, beta) if np.isfinite(yy) else 0.0,
                                otypes=[float])(y)
        term = np.where(gt > 0, p / np.sqrt(K) * aval, 0.0)
        total = total + coef / (1.0 + term)
    return total


def ccdf_marginal_approx(cfg: ClusterConfig, gamma):
    """Closed-form approximations to the marginal bounds.

    Replaces the ``delta1``-dependent integral by the constant
    ``A(sqrt(K) / gt**(2/beta)) / sqrt(K)``. For ``beta == 4`` and
    ``K == nt`` both forms reduce to
    ``1 / (1 + sqrt(gamma/K) * arccot(sqrt(K/gamma)))``.

    Returns
    -------
    (lower, upper)
    """
    g = _as_gamma(gamma)
    upper = _approx_sum(cfg.order, cfg.kappa, g, cfg.K, cfg.beta)
    lower = _approx_sum(cfg.order, 1.0, g, cfg.K, cfg.beta)
    return _ret(lower), _ret(upper)


def low_sir_slope(K: int, beta: float) -> float:
    """Outage slope ``K(K-1)/(beta-2) * Gamma(beta/2+1) Gamma(K-1) / Gamma(beta/2+K)``.

    For ``K == 1`` the limit ``1/(beta/2)`` of the same expression is
    returned (``Gamma(K-1) (K-1) -> 1``).
    """
    if not beta > 2:
        raise DomainError("pathloss exponent must satisfy beta > 2")
    h = beta / 2.0
    # K (K-1) Gamma(K-1) = K Gamma(K) keeps K = 1 finite
    log_ratio = special.gammaln(h + 1) + special.gammaln(K) - special.gammaln(h + K)
    return K / (beta - 2.0) * math.exp(log_ratio)


def low_sir_expansion(K: int, beta: float, gamma):
    """First-order expansion ``1 - slope * gamma`` of the CCDF for ``K == nt``."""
    g = _as_gamma(gamma)
    out = 1.0 - low_sir_slope(K, beta) * g
    return float(out) if np.ndim(out) == 0 else out


def analytic_curve(cfg: ClusterConfig, gamma, kind: str) -> SirCcdfCurve:
    """Build a :class:`SirCcdfCurve` of the requested analytic kind.

    ``kind`` is one of ``exact`` (closed form when ``K == nt``, the
    derivative series when ``K < nt`` and ``delta1`` is known, marginal
    by quadrature when ``delta1`` is absent), ``upper_bound``,
    ``lower_bound``, ``approximation`` or ``expansion``.
    """
    g = _as_gamma(gamma)
    conditional = cfg.delta1 is not None and cfg.K > 1
    if kind == "exact":
        if cfg.K != cfg.nt:
            if not conditional and cfg.K > 1:
                raise DomainError("exact marginal CCDF needs K == nt")
            # K == 1 has no location randomness beyond delta1 = 1
            vals = ccdf_theorem1(cfg.with_delta1(cfg.delta1 or 1.0), g)
        elif conditional or cfg.K == 1:
            vals = ccdf_conditional_exact(cfg.with_delta1(cfg.delta1 or 1.0), g)
        else:
            vals = ccdf_marginal_bounds(cfg, g)[1]
    elif kind in ("upper_bound", "lower_bound"):
        lo, up = (ccdf_conditional_bounds(cfg, g) if conditional
                  else ccdf_marginal_bounds(cfg, g))
        vals = up if kind == "upper_bound" else lo
    elif kind == "approximation":
        vals = ccdf_marginal_approx(cfg, g)[1]
    elif kind == "expansion":
        vals = np.clip(low_sir_expansion(cfg.K, cfg.beta, g), 0.0, 1.0)
    else:
        raise ValueError(f"unknown analytic kind {kind!r}")
    return SirCcdfCurve(g, np.atleast_1d(vals) if g.ndim else vals, kind, cfg)
