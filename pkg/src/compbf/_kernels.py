"""Monte-Carlo inner loops.

Each kernel exists twice: a loop form compiled with ``numba.njit`` and a
vectorised pure-numpy form. ``COMPBF_DISABLE_NUMBA=1`` (or a missing
numba install) selects the numpy form. Both forms take the same flat
"ragged" layout: per-trial point data concatenated, with ``offsets`` of
length ``n_trials + 1`` delimiting each trial.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

DISABLED = os.environ.get("COMPBF_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not DISABLED


def _cluster_sir_loop(r2, gains, offsets, h1, K, beta):
    n_trials = offsets.size - 1
    sir = np.empty(n_trials)
    delta1 = np.empty(n_trials)
    best = np.empty(K, np.int64)
    half = beta / 2.0
    for t in range(n_trials):
        lo = offsets[t]
        hi = offsets[t + 1]
        if hi - lo < K:
            sir[t] = np.nan
            delta1[t] = np.nan
            continue
        # K smallest squared distances by insertion; strict compares keep index order on ties
        m = 0
        for i in range(lo, hi):
            v = r2[i]
            if m < K:
                pos = m
                m += 1
            elif v < r2[best[K - 1]]:
                pos = K - 1
            else:
                continue
            while pos > 0 and r2[best[pos - 1]] > v:
                best[pos] = best[pos - 1]
                pos -= 1
            best[pos] = i
        total = 0.0
        for i in range(lo, hi):
            inside = False
            for j in range(K):
                if best[j] == i:
                    inside = True
                    break
            if not inside:
                x = r2[i]
                total += gains[i] * (1.0 / (x * x) if half == 2.0 else x ** (-half))
        near = r2[best[0]]
        signal = 1.0 / (near * near) if half == 2.0 else near ** (-half)
        sir[t] = h1[t] * signal / total if total > 0.0 else np.inf
        delta1[t] = np.sqrt(near / r2[best[K - 1]])
    return sir, delta1


def _segment_power_sum_loop(r2, gains, offsets, beta):
    n_trials = offsets.size - 1
    out = np.zeros(n_trials)
    half = beta / 2.0
    for t in range(n_trials):
        acc = 0.0
        for i in range(offsets[t], offsets[t + 1]):
            x = r2[i]
            acc += gains[i] * (1.0 / (x * x) if half == 2.0 else x ** (-half))
        out[t] = acc
    return out


def _pad(values, offsets, fill):
    counts = np.diff(offsets)
    n_trials = counts.size
    width = int(counts.max()) if n_trials else 0
    out = np.full((n_trials, max(width, 1)), fill, dtype=float)
    row = np.repeat(np.arange(n_trials), counts)
    col = np.arange(values.size) - np.repeat(offsets[:-1], counts)
    out[row, col] = values
    return out, counts


def cluster_sir_numpy(r2, gains, offsets, h1, K, beta):
    """Vectorised twin of the compiled cluster kernel."""
    R, counts = _pad(r2, offsets, np.inf)
    G, _ = _pad(gains, offsets, 0.0)
    idx = np.argsort(R, axis=1, kind="stable")[:, :K]
    near = np.take_along_axis(R, idx, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(np.isfinite(R), G * R ** (-beta / 2.0), 0.0)
    np.put_along_axis(contrib, idx, 0.0, axis=1)
    total = contrib.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(total > 0, h1 * near[:, 0] ** (-beta / 2.0) / total, np.inf)
        delta1 = np.sqrt(near[:, 0] / near[:, K - 1])
    short = counts < K
    sir[short] = np.nan
    delta1[short] = np.nan
    return sir, delta1


def segment_power_sum_numpy(r2, gains, offsets, beta):
    """Per-trial ``sum(gain * r2**(-beta/2))`` over ragged segments."""
    contrib = gains * r2 ** (-beta / 2.0)
    starts = offsets[:-1]
    nonempty = np.diff(offsets) > 0
    out = np.zeros(starts.size)
    if contrib.size:
        out[nonempty] = np.add.reduceat(contrib, starts[nonempty])
    return out


if numba is not None:
    cluster_sir_jit = numba.njit(cache=True, nogil=True)(_cluster_sir_loop)
    segment_power_sum_jit = numba.njit(cache=True, nogil=True)(_segment_power_sum_loop)
else:  # pragma: no cover
    cluster_sir_jit = None
    segment_power_sum_jit = None


def cluster_sir(r2, gains, offsets, h1, K, beta, use_numba=None):
    """SIR of the nearest point against the points beyond the K nearest.

    Parameters
    ----------
    r2, gains : ndarray
        Flat squared distances and fading gains of every point.
    offsets : ndarray of int64
        Segment boundaries, one segment per trial.
    h1 : ndarray
        Desired-link gain per trial.
    K : int
        Cluster size; the K nearest points are not interferers.
    beta : float
        Pathloss exponent.

    Returns
    -------
    sir, delta1 : ndarray
        ``nan`` where a trial has fewer than K points, ``inf`` where it
        has no interferer.
    """
    use = USE_NUMBA if use_numba is None else use_numba
    args = (np.ascontiguousarray(r2, dtype=float), np.ascontiguousarray(gains, dtype=float),
            np.ascontiguousarray(offsets, dtype=np.int64), np.ascontiguousarray(h1, dtype=float),
            int(K), float(beta))
    if use:
        return cluster_sir_jit(*args)
    return cluster_sir_numpy(*args)


def segment_power_sum(r2, gains, offsets, beta, use_numba=None):
    use = USE_NUMBA if use_numba is None else use_numba
    args = (np.ascontiguousarray(r2, dtype=float), np.ascontiguousarray(gains, dtype=float),
            np.ascontiguousarray(offsets, dtype=np.int64), float(beta))
    if use:
        return segment_power_sum_jit(*args)
    return segment_power_sum_numpy(*args)
