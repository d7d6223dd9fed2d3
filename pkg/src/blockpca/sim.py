"""Seeded sampling of the block spiked model and empirical spectral statistics.

Random streams come from numpy's counter-based Philox generator.  A sample is
identified by ``(seed, stream)``; Monte Carlo draw ``i`` uses ``stream=i`` so
results do not depend on the order in which draws are executed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import linalg
from .errors import GridTooCoarse, NTooSmall, SimError
from .model import ModelParams, omega
from .qve import DensityCurve

__all__ = [
    "MAX_N",
    "BlockPartition",
    "SpikedSample",
    "SimulationResult",
    "MonteCarloResult",
    "make_partition",
    "rng_for",
    "sample",
    "reconstruction_error",
    "lowrank_error",
    "spectrum",
    "monte_carlo",
    "empirical_cdf_distance",
]

MAX_N = 8000
HIST_BINS = 120


@dataclass(frozen=True)
class BlockPartition:
    sizes: tuple[int, ...]
    offsets: tuple[int, ...]

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def labels(self) -> NDArray[np.intp]:
        return np.repeat(np.arange(len(self.sizes)), self.sizes)

    def block(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k] + self.sizes[k])


def make_partition(N: int, rho: ArrayLike) -> BlockPartition:
    """Largest-remainder apportionment of ``N`` indices into contiguous blocks.

    Ties in the remainder go to the lower block index.  A block that would be
    empty takes one index from the currently largest block.
    """
    rho = np.asarray(rho, dtype=np.float64)
    K = rho.size
    if int(N) != N or N < K:
        raise NTooSmall(f"N={N} must be an integer >= K={K}", operation="make_partition")
    N = int(N)
    quota = N * rho / rho.sum()
    sizes = np.floor(quota).astype(np.int64)
    remainder = quota - sizes
    order = sorted(range(K), key=lambda k: (-remainder[k], k))
    for k in order[: N - int(sizes.sum())]:
        sizes[k] += 1
    for k in range(K):
        if sizes[k] == 0:
            sizes[int(np.argmax(sizes))] -= 1
            sizes[k] = 1
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return BlockPartition(sizes=tuple(int(s) for s in sizes), offsets=tuple(int(o) for o in offsets))


def rng_for(seed: int, stream: int | None = None) -> np.random.Generator:
    key = () if stream is None else (int(stream),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True)
class SpikedSample:
    """One draw: signal ``x``, observation ``Y`` and the scaled transform ``Ytilde``.

    ``Ytilde`` holds the transformed matrix already divided by sqrt(N).
    """

    x: NDArray[np.float64]
    Y: NDArray[np.float64]
    Ytilde: NDArray[np.float64]
    H: NDArray[np.float64]
    seed: int
    stream: int | None
    partition: BlockPartition
    model: ModelParams

    @property
    def N(self) -> int:
        return self.x.size

    def inverse_variances(self) -> NDArray[np.float64]:
        lab = self.partition.labels
        return self.model.S[np.ix_(lab, lab)]


def sample(m: ModelParams, N: int, seed: int, stream: int | None = None) -> SpikedSample:
    """Draw ``x`` from the prior, then the symmetric noise ``H`` (diagonal included)."""
    if N > MAX_N:
        raise SimError(f"N={N} exceeds the dense-storage cap {MAX_N}", operation="sample")
    part = make_partition(N, m.rho)
    rng = rng_for(seed, stream)
    if m.prior == "rademacher":
        x = rng.choice(np.array([-1.0, 1.0]), size=N)
    else:
        x = rng.standard_normal(N)
    W = rng.standard_normal((N, N))
    H = np.triu(W) + np.triu(W, 1).T

    lab = part.labels
    Sig = m.S[np.ix_(lab, lab)]
    rootN = np.sqrt(N)
    Y = np.outer(x, x) / rootN + H / np.sqrt(Sig)
    Yt = Y * Sig / rootN
    Yt[np.diag_indices(N)] -= Sig.sum(axis=1) / N
    return SpikedSample(x=x, Y=Y, Ytilde=Yt, H=H, seed=int(seed), stream=stream, partition=part, model=m)


def reconstruction_error(s: SpikedSample) -> float:
    """Max entrywise gap between ``Ytilde`` and the noise-plus-signal split ``(X + Z) / sqrt(N)``."""
    Sig = s.inverse_variances()
    rootN = np.sqrt(s.N)
    X = s.H * np.sqrt(Sig)
    X[np.diag_indices(s.N)] -= Sig.sum(axis=1) / rootN
    Z = np.outer(s.x, s.x) / rootN * Sig
    return float(np.max(np.abs((X + Z) / rootN - s.Ytilde)))


def _block_norms(x: NDArray[np.float64], part: BlockPartition) -> NDArray[np.float64]:
    return np.array([np.linalg.norm(x[part.block(k)]) for k in range(len(part.sizes))])


def lowrank_error(s: SpikedSample) -> float:
    """Operator norm of ``V^T Z V / sqrt(N) - Omega`` with V the normalised block signals."""
    nrm = _block_norms(s.x, s.partition)
    E = s.model.S * np.outer(nrm, nrm) / s.N - omega(s.model).entries
    return float(np.max(np.abs(linalg.sym_eig(E).values)))


@dataclass(frozen=True)
class SimulationResult:
    eigenvalues: NDArray[np.float64]  # ascending; only the top two when not full
    top_value: float
    top_vector: NDArray[np.float64]
    overlap_emp: NDArray[np.float64]
    overlap_global: float
    lowrank_error: float
    seed: int
    stream: int | None
    full: bool

    @property
    def second_value(self) -> float:
        return float(self.eigenvalues[-2])

    def to_dict(self, *, with_eigenvalues: bool = False) -> dict[str, Any]:
        out = {
            "seed": self.seed,
            "stream": self.stream,
            "topValue": self.top_value,
            "secondValue": self.second_value,
            "overlapEmp": [float(v) for v in self.overlap_emp],
            "overlapEmpSq": [float(v * v) for v in self.overlap_emp],
            "overlapGlobal": self.overlap_global,
            "lowrankError": self.lowrank_error,
        }
        if with_eigenvalues:
            out["eigenvalues"] = [float(v) for v in self.eigenvalues]
        return out


def spectrum(s: SpikedSample, full: bool = True) -> SimulationResult:
    """Eigen-analysis of ``Ytilde``; overlaps are signed so that ``<mu, sqrt(rho)> >= 0``."""
    if full:
        eig = linalg.sym_eig(s.Ytilde)
    else:
        eig = linalg.sym_eig_topk(s.Ytilde, k=2)
    values = eig.values[::-1].copy()
    u = eig.vectors[:, 0]
    part = s.partition
    nrm = _block_norms(s.x, part)
    mu = np.array([s.x[part.block(k)] @ u[part.block(k)] for k in range(len(part.sizes))]) / nrm
    q = float(s.x @ u) / float(np.linalg.norm(s.x))
    if mu @ np.sqrt(s.model.rho) < 0:
        mu, q, u = -mu, -q, -u
    return SimulationResult(
        eigenvalues=values,
        top_value=float(values[-1]),
        top_vector=u,
        overlap_emp=mu,
        overlap_global=q,
        lowrank_error=lowrank_error(s),
        seed=s.seed,
        stream=s.stream,
        full=full,
    )


@dataclass(frozen=True)
class MonteCarloResult:
    N: int
    seed: int
    results: tuple[SimulationResult, ...]
    top_mean: float
    top_std: float
    overlap_sq_mean: NDArray[np.float64]
    overlap_sq_std: NDArray[np.float64]
    global_sq_mean: float
    global_sq_std: float
    hist_edges: NDArray[np.float64] | None = None
    hist_counts: NDArray[np.int64] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "N": self.N,
            "seed": self.seed,
            "samples": len(self.results),
            "topValueMean": self.top_mean,
            "topValueStd": self.top_std,
            "overlapSqMean": [float(v) for v in self.overlap_sq_mean],
            "overlapSqStd": [float(v) for v in self.overlap_sq_std],
            "overlapGlobalSqMean": self.global_sq_mean,
            "overlapGlobalSqStd": self.global_sq_std,
            "perSample": [r.to_dict() for r in self.results],
        }


def _one(m: ModelParams, N: int, seed: int, index: int, full: bool) -> SimulationResult:
    return spectrum(sample(m, N, seed, stream=index), full=full)


def monte_carlo(
    m: ModelParams,
    N: int,
    samples: int,
    seed: int,
    *,
    full_spectrum: bool = True,
    workers: int = 1,
    bins: int = HIST_BINS,
) -> MonteCarloResult:
    """Independent draws ``stream = 0 .. samples-1`` aggregated in index order."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(lambda i: _one(m, N, seed, i, full_spectrum), range(samples)))
    else:
        res = [_one(m, N, seed, i, full_spectrum) for i in range(samples)]

    tops = np.array([r.top_value for r in res])
    mu2 = np.array([r.overlap_emp**2 for r in res])
    q2 = np.array([r.overlap_global**2 for r in res])
    edges = counts = None
    if full_spectrum:
        pooled = np.concatenate([r.eigenvalues for r in res])
        counts, edges = np.histogram(pooled, bins=bins)
    return MonteCarloResult(
        N=N,
        seed=int(seed),
        results=tuple(res),
        top_mean=float(tops.mean()),
        top_std=float(tops.std()),
        overlap_sq_mean=mu2.mean(axis=0),
        overlap_sq_std=mu2.std(axis=0),
        global_sq_mean=float(q2.mean()),
        global_sq_std=float(q2.std()),
        hist_edges=edges,
        hist_counts=counts,
    )


def empirical_cdf_distance(
    eigenvalues: Sequence[float] | NDArray[np.float64],
    curve: DensityCurve,
    *,
    drop_top: bool = False,
) -> float:
    """Kolmogorov distance between the empirical spectral CDF and the curve's CDF.

    With ``drop_top`` the single largest eigenvalue (the outlier) is removed
    first.  The grid must cover every remaining eigenvalue.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    if drop_top:
        ev = ev[:-1]
    if ev.size == 0:
        raise ValueError("no eigenvalues to compare")
    grid = curve.grid
    if ev[0] < grid[0] or ev[-1] > grid[-1]:
        raise GridTooCoarse(
            f"eigenvalues span [{ev[0]:.4f}, {ev[-1]:.4f}] beyond grid [{grid[0]:.4f}, {grid[-1]:.4f}]",
            operation="empirical_cdf_distance",
        )
    inside = np.count_nonzero((grid >= ev[0]) & (grid <= ev[-1]))
    if inside < 50:
        raise GridTooCoarse(
            f"only {inside} grid points inside the eigenvalue range", operation="empirical_cdf_distance"
        )
    F = np.interp(ev, grid, curve.cdf())
    n = ev.size
    upper = np.arange(1, n + 1) / n
    lower = np.arange(n) / n
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(F - lower))))
