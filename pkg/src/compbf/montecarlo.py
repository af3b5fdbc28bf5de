"""Monte-Carlo estimation of SIR CCDFs and spectral efficiencies.

Trials are split into fixed-size chunks. Chunk ``i`` draws from its own
stream ``SeedSequence(seed, spawn_key=(i,))``, so results depend only on
``(experiment, seed)`` and never on the number of worker threads
(``COMPBF_THREADS``).
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from . import _kernels
from ._io import atomic_write_text
from .analytic import ClusterConfig, SirCcdfCurve, db_to_linear
from .channel import zf_desired_gains
from .errors import DomainError, StarvationError, TruncationError
from .geometry import GridSpec, window_points, window_radius

MODES = ("ppp", "ppp_conditional_delta1", "grid")
CHUNK = 8192
CHUNK_POINTS = 1 << 23
MIN_ACCEPTANCE = 1e-4
CCDF_CSV_VERSION = "compbf-ccdf v1"


def default_gamma_grid_db() -> np.ndarray:
    return np.arange(-10.0, 31.0, 1.0)


def worker_count() -> int:
    try:
        n = int(os.environ.get("COMPBF_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class McExperiment:
    """Parameters of one Monte-Carlo run.

    ``fading`` is ``"shortcut"`` (desired gain drawn from its Gamma law)
    or ``"zf"`` (desired gain from solving zero forcing on drawn
    channels). ``sampler`` selects how PPP deployments are produced:
    ``"disc"`` draws a Poisson number of uniform points in the window and
    picks the K nearest, ``"ordered"`` draws the K nearest distances from
    cumulative Exp(1) arrivals and the interferers as an independent PPP
    in the annulus beyond the Kth distance. Both give the same law.
    """

    mode: str
    cfg: ClusterConfig
    trials: int = 100_000
    gamma_grid_db: np.ndarray = field(default_factory=default_gamma_grid_db)
    lam: float = 1.0
    radius: Optional[float] = None
    delta1_target: Optional[float] = None
    delta1_tolerance: float = 0.01
    seed: int = 0
    fading: str = "shortcut"
    sampler: str = "disc"
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        self.gamma_grid_db = np.asarray(self.gamma_grid_db, dtype=float)
        if np.any(np.diff(self.gamma_grid_db) <= 0):
            raise DomainError("gamma_grid_db must be strictly ascending")
        if self.fading not in ("shortcut", "zf"):
            raise DomainError(f"unknown fading model {self.fading!r}")
        if self.sampler not in ("disc", "ordered"):
            raise DomainError(f"unknown sampler {self.sampler!r}")
        if not self.lam > 0:
            raise DomainError("density must be positive")
        if self.mode == "ppp_conditional_delta1":
            if self.delta1_target is None:
                self.delta1_target = self.cfg.delta1
            if self.delta1_target is None or not 0 < self.delta1_target <= 1:
                raise DomainError("conditional mode needs a delta1 target in (0, 1]")
            if not self.delta1_tolerance > 0:
                raise DomainError("delta1_tolerance must be positive")
            if self.cfg.K < 2:
                raise DomainError("delta1 conditioning needs K >= 2")
        if self.radius is None and self.mode != "grid":
            self.radius = window_radius(self.lam, self.cfg.K)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cfg"] = asdict(self.cfg)
        d["grid"] = asdict(self.grid)
        d["gamma_grid_db"] = self.gamma_grid_db.tolist()
        return d


@dataclass
class EmpiricalCcdf(SirCcdfCurve):
    """Empirical CCDF with 95 % Wilson intervals and the raw samples."""

    ci_lo: Optional[np.ndarray] = None
    ci_hi: Optional[np.ndarray] = None
    attempted_trials: int = 0
    accepted_trials: int = 0
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    delta1_samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_trials / self.attempted_trials if self.attempted_trials else 0.0


def wilson_interval(k, n: int, confidence: float = 0.95):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    k = np.asarray(k, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # round-off can leave the endpoints a few ulp off 0 and 1
    lo = np.where(k <= 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k >= n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _desired_gains(exp: McExperiment, n: int, rng: np.random.Generator) -> np.ndarray:
    K, nt = exp.cfg.K, exp.cfg.nt
    if exp.fading == "zf":
        return zf_desired_gains(K, nt, n, rng)
    return rng.standard_gamma(nt - K + 1, n)


def _ragged_uniform(counts, rng):
    offsets = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, rng.random(int(offsets[-1])), rng.standard_exponential(int(offsets[-1]))


def _run_disc(exp: McExperiment, n: int, rng):
    K, beta = exp.cfg.K, exp.cfg.beta
    R2 = exp.radius ** 2
    counts = rng.poisson(exp.lam * math.pi * R2, n)
    offsets, u, gains = _ragged_uniform(counts, rng)
    h1 = _desired_gains(exp, n, rng)
    sir, delta1 = _kernels.cluster_sir(R2 * u, gains, offsets, h1, K, beta)
    return sir, delta1


def _run_ordered(exp: McExperiment, n: int, rng, target=None, tol=None):
    K, beta = exp.cfg.K, exp.cfg.beta
    scale = 1.0 / (math.pi * exp.lam)
    arrivals = np.cumsum(rng.standard_exponential((n, K)), axis=1)
    delta1 = np.sqrt(arrivals[:, 0] / arrivals[:, K - 1])
    keep = np.ones(n, dtype=bool) if target is None else np.abs(delta1 - target) <= tol
    r1sq = arrivals[keep, 0] * scale
    rksq = arrivals[keep, K - 1] * scale
    R2 = exp.radius ** 2
    area = np.clip(R2 - rksq, 0.0, None)
    counts = rng.poisson(exp.lam * math.pi * area)
    offsets, u, gains = _ragged_uniform(counts, rng)
    r2 = np.repeat(rksq, counts) + np.repeat(area, counts) * u
    interference = _kernels.segment_power_sum(r2, gains, offsets, beta)
    h1 = _desired_gains(exp, int(keep.sum()), rng)
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0, h1 * r1sq ** (-beta / 2.0) / interference, np.inf)
    return sir, delta1[keep]


def _run_grid(exp: McExperiment, n: int, rng):
    K, beta = exp.cfg.K, exp.cfg.beta
    lattice = exp.grid.lattice()
    (x0, x1), (y0, y1) = exp.grid.drop_region
    users = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    r2 = ((users[:, None, :] - lattice[None, :, :]) ** 2).sum(axis=-1).ravel()
    m = lattice.shape[0]
    offsets = np.arange(0, m * n + 1, m, dtype=np.int64)
    gains = rng.standard_exponential(m * n)
    h1 = _desired_gains(exp, n, rng)
    return _kernels.cluster_sir(r2, gains, offsets, h1, K, beta)


def _run_chunk(exp: McExperiment, index: int, n: int):
    rng = _chunk_rng(exp.seed, index)
    if exp.mode == "grid":
        sir, d1 = _run_grid(exp, n, rng)
    elif exp.mode == "ppp":
        sir, d1 = (_run_disc if exp.sampler == "disc" else _run_ordered)(exp, n, rng)
    elif exp.sampler == "ordered":
        sir, d1 = _run_ordered(exp, n, rng, exp.delta1_target, exp.delta1_tolerance)
    else:
        sir, d1 = _run_disc(exp, n, rng)
        keep = np.abs(d1 - exp.delta1_target) <= exp.delta1_tolerance
        sir, d1 = sir[keep], d1[keep]
    return sir, d1


def chunk_size(exp: McExperiment) -> int:
    """Trials per chunk; shrinks with the window so a chunk stays near 8M points."""
    if exp.mode == "grid":
        return CHUNK
    return int(min(CHUNK, max(64, CHUNK_POINTS // window_points(exp.cfg.K))))


def simulate_sir(exp: McExperiment):
    """Return ``(sir_samples, delta1_samples)`` in deterministic chunk order."""
    size = chunk_size(exp)
    sizes = [size] * (exp.trials // size)
    if exp.trials % size:
        sizes.append(exp.trials % size)
    jobs = list(enumerate(sizes))
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(exp, *job), jobs))
    else:
        parts = [_run_chunk(exp, i, n) for i, n in jobs]
    sir = np.concatenate([p[0] for p in parts])
    d1 = np.concatenate([p[1] for p in parts])
    if np.any(np.isnan(sir)):
        raise TruncationError("a realization had fewer than K base stations in the window")
    if np.any(np.isinf(sir)):
        raise TruncationError("a realization had no interferer inside the window")
    return sir, d1


def empirical_ccdf(sir: np.ndarray, gamma_grid_db, config=None, attempted=None) -> EmpiricalCcdf:
    """Fraction of samples with ``SIR >= gamma`` and its Wilson interval."""
    gamma = db_to_linear(gamma_grid_db)
    n = sir.size
    if n == 0:
        raise StarvationError("no samples to estimate a CCDF from")
    ordered = np.sort(sir)
    counts = n - np.searchsorted(ordered, gamma, side="left")
    lo, hi = wilson_interval(counts, n)
    return EmpiricalCcdf(gamma, counts / n, "empirical", config, (hi - lo) / 2.0,
                         ci_lo=lo, ci_hi=hi, attempted_trials=attempted or n,
                         accepted_trials=n, samples=sir)


def run_experiment(exp: McExperiment) -> EmpiricalCcdf:
    """Run the experiment and return its empirical CCDF.

    Raises
    ------
    StarvationError
        In conditional mode when fewer than ``1e-4`` of the trials fall
        in the ``delta1`` acceptance band.
    """
    sir, d1 = simulate_sir(exp)
    if exp.mode == "ppp_conditional_delta1" and sir.size < MIN_ACCEPTANCE * exp.trials:
        raise StarvationError(
            f"accepted {sir.size} of {exp.trials} trials (rate below {MIN_ACCEPTANCE})")
    out = empirical_ccdf(sir, exp.gamma_grid_db, exp.cfg, exp.trials)
    out.delta1_samples = d1
    return out


def empirical_spectral_efficiency(source: Union[McExperiment, EmpiricalCcdf], overhead=0.0):
    """``(1 - alpha) * mean(log2(1 + SIR))`` and its standard error.

    ``overhead`` is a pilot fraction ``alpha`` or any object with an
    ``alpha`` attribute.
    """
    alpha = float(getattr(overhead, "alpha", overhead))
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"pilot overhead must lie in [0, 1], got {alpha}")
    result = run_experiment(source) if isinstance(source, McExperiment) else source
    rate = np.log2(1.0 + result.samples)
    n = rate.size
    se = rate.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
    return (1.0 - alpha) * float(rate.mean()), (1.0 - alpha) * se


def ccdf_csv_text(curve: SirCcdfCurve) -> str:
    """CSV body with ``gamma_db, ccdf, ci_lo, ci_hi`` columns (CI empty for analytic curves)."""
    lo = getattr(curve, "ci_lo", None)
    hi = getattr(curve, "ci_hi", None)
    lines = [f"# {CCDF_CSV_VERSION}", f"# kind={curve.kind}", "gamma_db,ccdf,ci_lo,ci_hi"]
    for i, (gdb, v) in enumerate(zip(curve.gamma_db, curve.values)):
        a = "" if lo is None else repr(float(lo[i]))
        b = "" if hi is None else repr(float(hi[i]))
        lines.append(f"{float(gdb)!r},{float(v)!r},{a},{b}")
    return "\n".join(lines) + "\n"


def write_ccdf_csv(curve: SirCcdfCurve, path, experiment: Optional[McExperiment] = None) -> list:
    """Write the curve atomically; a JSON sidecar records the experiment.

    Returns the paths written.
    """
    path = Path(path)
    written = [atomic_write_text(path, ccdf_csv_text(curve))]
    if experiment is not None:
        side = path.with_suffix(".json")
        written.append(atomic_write_text(
            side, json.dumps(experiment.to_dict(), indent=2, sort_keys=True) + "\n"))
    return written


def read_ccdf_csv(path) -> dict:
    """Parse a CCDF CSV into arrays keyed by column name plus ``kind``."""
    cols = {"gamma_db": [], "ccdf": [], "ci_lo": [], "ci_hi": []}
    kind = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("kind="):
                kind = body[5:]
            elif body != CCDF_CSV_VERSION:
                raise ValueError(f"unsupported CCDF file: {body!r}")
            continue
        if line.startswith("gamma_db") or not line:
            continue
        parts = line.split(",")
        for key, val in zip(cols, parts):
            cols[key].append(float(val) if val else float("nan"))
    out = {k: np.array(v) for k, v in cols.items()}
    out["kind"] = kind
    return out
