"""Base-station deployments and K-nearest dynamic clustering.

PPP deployments are drawn in a disc centred on the user at the origin;
grid deployments place 36 base stations on a square lattice and drop the
user uniformly in the central lattice cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._io import atomic_write_text
from .errors import DomainError, InsufficientPointsError

REALIZATION_CSV_VERSION = "compbf-realization v1"

RngLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def resolve_rng(rng: RngLike):
    """Return ``(generator, seed_record)`` for any accepted RNG argument.

    The record is ``{"entropy": ..., "spawn_key": [...]}`` which rebuilds
    the exact stream through :func:`rng_from_record`.
    """
    if isinstance(rng, np.random.Generator):
        gen = rng
        ss = getattr(gen.bit_generator, "seed_seq", None)
    else:
        ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
        gen = np.random.Generator(np.random.PCG64(ss))
    if isinstance(ss, np.random.SeedSequence):
        record = {"entropy": int(ss.entropy), "spawn_key": [int(k) for k in ss.spawn_key]}
    else:
        record = None
    return gen, record


def rng_from_record(record: dict) -> np.random.Generator:
    ss = np.random.SeedSequence(record["entropy"], spawn_key=tuple(record["spawn_key"]))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class NetworkRealization:
    """One sampled deployment seen from a single user.

    ``order`` lists base-station indices by increasing distance from the
    user, ties broken by index, so ``sorted_distances[k]`` belongs to
    ``bs_positions[order[k]]``.
    """

    bs_positions: np.ndarray
    user_position: np.ndarray
    cluster_size: int = 1
    seed: Optional[dict] = None
    lam: Optional[float] = None
    radius: Optional[float] = None
    order: np.ndarray = field(init=False, repr=False)
    sorted_distances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pos = np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)
        user = np.asarray(self.user_position, dtype=float).reshape(2)
        pos.setflags(write=False)
        user.setflags(write=False)
        object.__setattr__(self, "bs_positions", pos)
        object.__setattr__(self, "user_position", user)
        dist = np.hypot(pos[:, 0] - user[0], pos[:, 1] - user[1])
        order = np.argsort(dist, kind="stable")
        sd = dist[order]
        order.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "sorted_distances", sd)

    def __len__(self):
        return self.bs_positions.shape[0]

    def scaled(self, factor: float) -> "NetworkRealization":
        """Same deployment with every coordinate multiplied by ``factor``."""
        return NetworkRealization(self.bs_positions * factor, self.user_position * factor,
                                  self.cluster_size, self.seed,
                                  None if self.lam is None else self.lam / factor ** 2,
                                  None if self.radius is None else self.radius * factor)


@dataclass(frozen=True)
class GridSpec:
    """Square lattice of ``side_count**2`` base stations."""

    side_count: int = 6
    spacing: float = 500.0

    def __post_init__(self):
        if self.side_count < 2 or self.side_count % 2:
            raise DomainError("grid needs an even side_count >= 2")
        if not self.spacing > 0:
            raise DomainError("grid spacing must be positive")

    def lattice(self) -> np.ndarray:
        # indices shifted so that the central cell is [0, spacing]^2
        idx = (np.arange(self.side_count) - (self.side_count // 2 - 1)) * self.spacing
        xx, yy = np.meshgrid(idx, idx, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @property
    def drop_region(self):
        """``((xmin, xmax), (ymin, ymax))`` of the central square."""
        return (0.0, self.spacing), (0.0, self.spacing)


def window_points(K: int) -> int:
    """Expected point count of the simulation disc for cluster size ``K``.

    With ``r_K**2`` at its mean ``K / (pi lam)``, the interference from
    beyond ``R`` is ``K / (pi lam R**2 - K)`` times that from ``[r_K, R]``
    at ``beta = 4``, which is below 0.1 % once ``pi lam R**2 > 1001 K``.
    """
    return max(500, 1002 * int(K))


def window_radius(lam: float, K: int = 1) -> float:
    if not lam > 0:
        raise DomainError(f"density must be positive, got {lam}")
    return math.sqrt(window_points(K) / (math.pi * lam))


def sample_ppp(lam: float, radius: float, rng: RngLike = None, cluster_size: int = 1) -> NetworkRealization:
    """Homogeneous PPP of density ``lam`` in the disc of ``radius`` around the origin."""
    if not lam > 0 or not radius > 0:
        raise DomainError("lam and radius must be positive")
    gen, record = resolve_rng(rng)
    n = gen.poisson(lam * math.pi * radius * radius)
    r = radius * np.sqrt(gen.random(n))
    theta = 2.0 * math.pi * gen.random(n)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return NetworkRealization(pos, np.zeros(2), cluster_size, record, lam, radius)


def nearest_k_cluster(net: NetworkRealization, K: int) -> np.ndarray:
    """Indices of the K nearest base stations; the rest are interferers."""
    if K < 1:
        raise DomainError("K must be >= 1")
    if K > len(net):
        raise InsufficientPointsError(f"need {K} base stations, realization has {len(net)}")
    return net.order[:K].copy()


def build_grid(spec: GridSpec = GridSpec(), rng: RngLike = None, cluster_size: int = 1,
               user_position=None) -> NetworkRealization:
    """Lattice deployment with the user dropped uniformly in the central cell."""
    gen, record = resolve_rng(rng)
    if user_position is None:
        (x0, x1), (y0, y1) = spec.drop_region
        user_position = (gen.uniform(x0, x1), gen.uniform(y0, y1))
    return NetworkRealization(spec.lattice(), np.asarray(user_position, dtype=float),
                              cluster_size, record)


def protection_area(net: NetworkRealization, K: int) -> float:
    """Interferer-free annulus area ``pi (d_K**2 - d_1**2)``."""
    if K < 1:
        raise DomainError("K must be >= 1")
    if K > len(net):
        raise InsufficientPointsError(f"need {K} base stations, realization has {len(net)}")
    d = net.sorted_distances
    return math.pi * (d[K - 1] ** 2 - d[0] ** 2)


def write_realization_csv(net: NetworkRealization, path) -> None:
    """Write ``x,y`` rows with a commented provenance header."""
    path = Path(path)
    seed = "" if net.seed is None else f"{net.seed['entropy']}:{'/'.join(map(str, net.seed['spawn_key']))}"
    lines = [
        f"# {REALIZATION_CSV_VERSION}",
        f"# seed={seed}",
        f"# lam={'' if net.lam is None else repr(float(net.lam))}",
        f"# radius={'' if net.radius is None else repr(float(net.radius))}",
        f"# cluster_size={net.cluster_size}",
        f"# user={float(net.user_position[0])!r},{float(net.user_position[1])!r}",
        "x,y",
    ]
    lines += [f"{x!r},{y!r}" for x, y in net.bs_positions.tolist()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_realization_csv(path) -> NetworkRealization:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                meta[key] = val
            elif body != REALIZATION_CSV_VERSION:
                raise ValueError(f"unsupported realization file: {body!r}")
        elif line and line != "x,y":
            x, y = line.split(",")
            rows.append((float(x), float(y)))
    seed = None
    if meta.get("seed"):
        entropy, keys = meta["seed"].split(":")
        seed = {"entropy": int(entropy), "spawn_key": [int(k) for k in keys.split("/") if k]}
    user = tuple(float(v) for v in meta["user"].split(","))
    return NetworkRealization(np.array(rows).reshape(-1, 2), np.array(user),
                              int(meta.get("cluster_size", 1)), seed,
                              float(meta["lam"]) if meta.get("lam") else None,
                              float(meta["radius"]) if meta.get("radius") else None)
