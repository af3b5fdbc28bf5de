"""Rayleigh channels, zero-forcing coordinated beamforming and the SIR.

Channel rows follow the downlink convention ``h[i, k]``: the 1 x nt row
from base station ``k`` to user ``i``. Base station ``k`` picks the unit
vector ``v_k`` that maximises ``|h[k, k] v_k|**2`` subject to
``h[i, k] v_k = 0`` for every other in-cluster user ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, RankDeficiencyError, TruncationError
from .geometry import NetworkRealization, RngLike, resolve_rng

RANK_TOL = 1e-12


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """IID CN(0, 1) entries."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def _null_projection(constraints: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """Project ``desired^H`` onto the orthogonal complement of ``constraints^H``.

    ``constraints`` is ``(..., m, nt)`` and ``desired`` is ``(..., nt)``;
    returns the unnormalised projection ``(..., nt)``.
    """
    target = np.conj(desired)
    if constraints.shape[-2] == 0:
        return target
    basis = np.conj(np.swapaxes(constraints, -1, -2))  # (..., nt, m)
    q, r = np.linalg.qr(basis)
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    scale = np.linalg.norm(constraints, axis=-1)
    if np.any(diag <= RANK_TOL * scale):
        raise RankDeficiencyError("zero-forcing constraint rows are linearly dependent")
    coeff = np.einsum("...ji,...j->...i", np.conj(q), target)
    return target - np.einsum("...ji,...i->...j", q, coeff)


def solve_zf_beamformer(cluster_channels: np.ndarray, k: int = 0) -> np.ndarray:
    """Zero-forcing beamformer of one base station.

    Parameters
    ----------
    cluster_channels : ndarray, shape (K, nt)
        Row ``i`` is the channel from this base station to in-cluster
        user ``i``; row ``k`` is the desired link.
    k : int
        Index of the served user.

    Returns
    -------
    ndarray, shape (nt,)
        Unit-norm beamformer, phased so that ``h[k] @ v`` is real and
        nonnegative.
    """
    h = np.asarray(cluster_channels, dtype=complex)
    if h.ndim != 2:
        raise DomainError("cluster_channels must be a (K, nt) matrix")
    K, nt = h.shape
    if K > nt:
        raise DomainError(f"zero forcing needs nt >= K, got K={K}, nt={nt}")
    others = np.delete(h, k, axis=0)
    p = _null_projection(others, h[k])
    norm = np.linalg.norm(p)
    if norm == 0:
        raise RankDeficiencyError("desired channel lies in the span of the constraints")
    return p / norm


@dataclass
class BeamformingSolution:
    """Beamformers of one cluster and the resulting fading gains.

    ``channels[i, k]`` is the row from base station ``k`` to user ``i``;
    ``v[k]`` is base station ``k``'s beamformer. ``desired_gain`` is
    ``|h[0,0] v_0|**2`` for the user at the origin and ``interferer_gains``
    holds the out-of-cluster gains ordered by distance.
    """

    channels: np.ndarray
    v: np.ndarray
    interferer_gains: np.ndarray

    @property
    def K(self) -> int:
        return self.v.shape[0]

    @property
    def desired_gain(self) -> float:
        return float(np.abs(self.channels[0, 0] @ self.v[0]) ** 2)

    def zf_residual(self) -> float:
        """Largest ``|h[i, k] v_k|`` over in-cluster ``i != k``."""
        cross = np.abs(np.einsum("ikn,kn->ik", self.channels, self.v))
        np.fill_diagonal(cross, 0.0)
        return float(cross.max()) if cross.size else 0.0


def solve_cluster(channels: np.ndarray) -> np.ndarray:
    """Beamformers for every base station of a ``(K, K, nt)`` channel tensor."""
    K = channels.shape[0]
    return np.stack([solve_zf_beamformer(channels[:, k, :], k) for k in range(K)])


def beamform(net: NetworkRealization, nt: int, rng: RngLike = None) -> BeamformingSolution:
    """Draw cluster channels, solve zero forcing and draw interferer gains.

    Interferer beamformers serve other clusters' users and are independent
    of the channel to this user, so their gains are drawn as Exp(1).
    """
    K = net.cluster_size
    if K > len(net):
        raise DomainError("realization has fewer base stations than the cluster size")
    gen, _ = resolve_rng(rng)
    channels = complex_gaussian((K, K, nt), gen)
    v = solve_cluster(channels)
    gains = gen.standard_exponential(len(net) - K)
    return BeamformingSolution(channels, v, gains)


def instantaneous_sir(net: NetworkRealization, bf: BeamformingSolution, beta: float) -> float:
    """``H_1 d_1**(-beta) / sum_{k>K} H_k d_k**(-beta)`` for the user of ``net``."""
    if not beta > 2:
        raise DomainError(f"pathloss exponent must satisfy beta > 2, got {beta}")
    K = net.cluster_size
    if bf.K != K:
        raise DomainError(f"beamforming solution has K={bf.K}, realization has K={K}")
    d = net.sorted_distances
    far = d[K:]
    if far.size != bf.interferer_gains.size:
        raise DomainError("interferer gain count does not match the realization")
    interference = float(np.sum(bf.interferer_gains * far ** (-beta)))
    if not interference > 0:
        raise TruncationError("no out-of-cluster interference in the realization")
    return bf.desired_gain * d[0] ** (-beta) / interference


def fading_shortcut_sample(K: int, nt: int, rng: RngLike = None, n_interferers: int = 0,
                           size: Optional[int] = None):
    """Draw ``H_1 ~ Gamma(nt-K+1, 1)`` and Exp(1) interferer gains directly.

    Returns
    -------
    (h1, interferer_gains)
        ``h1`` is a float (or array of ``size``); the gains have shape
        ``(n_interferers,)`` or ``(size, n_interferers)``.
    """
    if K < 1 or nt < K:
        raise DomainError(f"need 1 <= K <= nt, got K={K}, nt={nt}")
    gen, _ = resolve_rng(rng)
    h1 = gen.standard_gamma(nt - K + 1, size)
    shape = (n_interferers,) if size is None else (size, n_interferers)
    return h1, gen.standard_exponential(shape)


def zf_desired_gains(K: int, nt: int, n: int, rng: RngLike = None, return_residual: bool = False):
    """Desired-link gains ``|h[0,0] v_0|**2`` from ``n`` full zero-forcing solves.

    Only base station 0's problem is solved per draw: its desired row and
    the ``K-1`` rows towards the other in-cluster users.
    """
    if K < 1 or nt < K:
        raise DomainError(f"need 1 <= K <= nt, got K={K}, nt={nt}")
    gen, _ = resolve_rng(rng)
    rows = complex_gaussian((n, K, nt), gen)
    p = _null_projection(rows[:, 1:, :], rows[:, 0, :])
    norm = np.linalg.norm(p, axis=-1)
    v = p / norm[:, None]
    gains = norm ** 2
    if not return_residual:
        return gains
    if K > 1:
        resid = np.abs(np.einsum("nkj,nj->nk", rows[:, 1:, :], v)).max(axis=1)
    else:
        resid = np.zeros(n)
    return gains, resid
