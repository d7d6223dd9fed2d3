"""Parameters of the block-structured spiked model and derived K x K matrices."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

from . import linalg
from .errors import (
    BadK,
    EmptySubset,
    FullSubset,
    IndexOutOfRange,
    NonPositiveEntry,
    NonSymmetricS,
    RhoNotSimplex,
)

__all__ = [
    "PRIORS",
    "ModelParams",
    "OmegaMatrix",
    "GammaMatrix",
    "validate",
    "make_model",
    "load_model",
    "omega",
    "gamma",
    "snr",
    "snr_derivative",
    "reduced_model",
    "t_for_snr",
]

PRIORS = ("gaussian", "rademacher")
RHO_RENORM_TOL = 1e-9
SYM_TOL = 1e-12
SIMPLE_GAP_TOL = 1e-12


def _frozen(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Validated ``(K, rho, S, prior)``.  Build through :func:`validate`."""

    K: int
    rho: NDArray[np.float64]
    S: NDArray[np.float64]
    prior: str = "gaussian"

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": self.K,
            "rho": [float(r) for r in self.rho],
            "S": [[float(v) for v in row] for row in self.S],
            "prior": self.prior,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; used as the model hash in outputs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_entry(self, k: int, l: int, value: float) -> "ModelParams":
        """Copy with ``s_kl = s_lk = value``."""
        S = np.array(self.S)
        S[k, l] = S[l, k] = value
        return validate({"K": self.K, "rho": self.rho, "S": S, "prior": self.prior})


@dataclass(frozen=True)
class OmegaMatrix:
    entries: NDArray[np.float64]
    snr: float
    perron_vector: NDArray[np.float64]
    gap: float

    @property
    def simple(self) -> bool:
        """False when the top eigenvalue is numerically multiple (flag only)."""
        return self.gap > SIMPLE_GAP_TOL


@dataclass(frozen=True)
class GammaMatrix:
    entries: NDArray[np.float64]


def _to_float(v: Any) -> float:
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    return float(v)


def validate(raw: Mapping[str, Any]) -> ModelParams:
    """Check and normalise candidate parameters.

    ``rho`` entries may be floats, :class:`fractions.Fraction` or strings such
    as ``"1/3"``.  A simplex defect up to 1e-9 is renormalised away; anything
    larger is rejected.
    """
    try:
        rho_in = [_to_float(r) for r in raw["rho"]]
        S_in = np.array([[_to_float(v) for v in row] for row in raw["S"]], dtype=np.float64)
    except KeyError as exc:
        raise BadK(f"missing key {exc}", operation="validate") from exc
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise BadK(f"unparseable parameters: {exc}", operation="validate") from exc

    K = raw.get("K", len(rho_in))
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or K < 1:
        raise BadK(f"K must be a positive integer, got {K!r}", operation="validate")
    K = int(K)
    if len(rho_in) != K or S_in.shape != (K, K):
        raise BadK(
            f"dimension mismatch: K={K}, len(rho)={len(rho_in)}, S shape={S_in.shape}",
            operation="validate",
        )

    rho = np.array(rho_in)
    if not np.all(np.isfinite(rho)) or not np.all(np.isfinite(S_in)):
        raise NonPositiveEntry("non-finite parameter", operation="validate")
    total = float(rho.sum())
    if np.any(rho <= 0.0) or np.any(rho > 1.0) or abs(total - 1.0) > RHO_RENORM_TOL:
        raise RhoNotSimplex(f"rho={rho.tolist()} is not a probability vector (sum {total!r})", operation="validate")
    rho = rho / total

    scale = max(1.0, float(np.max(np.abs(S_in))))
    if np.max(np.abs(S_in - S_in.T)) > SYM_TOL * scale:
        raise NonSymmetricS("S is not symmetric", operation="validate")
    S = 0.5 * (S_in + S_in.T)
    if np.any(S <= 0.0):
        raise NonPositiveEntry("all s_kl must be strictly positive", operation="validate")

    prior = str(raw.get("prior", "gaussian")).lower()
    if prior not in PRIORS:
        raise BadK(f"unknown prior {prior!r}; expected one of {PRIORS}", operation="validate")

    return ModelParams(K=K, rho=_frozen(rho), S=_frozen(S), prior=prior)


def make_model(rho: Iterable[Any], S: Iterable[Iterable[Any]], prior: str = "gaussian") -> ModelParams:
    rho = list(rho)
    return validate({"K": len(rho), "rho": rho, "S": [list(r) for r in S], "prior": prior})


def load_model(path: str | Path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise BadK("model file must hold a JSON object", operation="load_model")
    return validate(raw)


def omega(m: ModelParams) -> OmegaMatrix:
    # sqrt(rho_k rho_l) s_kl is bitwise symmetric, unlike sqrt(rho_k) s_kl sqrt(rho_l)
    W = np.sqrt(np.outer(m.rho, m.rho)) * m.S
    eig = linalg.sym_eig(W)
    v = eig.vectors[:, 0]
    if v.sum() < 0:
        v = -v
    gap = float(eig.values[0] - eig.values[1]) if m.K > 1 else float("inf")
    return OmegaMatrix(entries=_frozen(W), snr=float(eig.values[0]), perron_vector=_frozen(v), gap=gap)


def gamma(m: ModelParams) -> GammaMatrix:
    return GammaMatrix(entries=_frozen(m.S * m.rho[None, :]))


def snr(m: ModelParams) -> float:
    return omega(m).snr


def snr_derivative(m: ModelParams, k: int, l: int) -> float:
    """d lambda_1(Omega) / d s_kl with the symmetric pair moved together.

    Off-diagonal: 2 sqrt(rho_k rho_l) v_k v_l.  Diagonal entries appear once in
    Omega, so the factor 2 drops.
    """
    if not (0 <= k < m.K and 0 <= l < m.K):
        raise IndexOutOfRange(f"index ({k}, {l}) outside K={m.K}", operation="snr_derivative")
    v = omega(m).perron_vector
    factor = 1.0 if k == l else 2.0
    return float(factor * np.sqrt(m.rho[k] * m.rho[l]) * v[k] * v[l])


def reduced_model(m: ModelParams, keep: Iterable[int]) -> ModelParams:
    """Model seen by PCA on the sub-matrix restricted to the blocks in ``keep``.

    With alpha the kept mass, proportions become rho_k / alpha and the rescaled
    observation has inverse variances alpha * s_kl, so the reduced Omega is the
    principal minor of the full one.
    """
    idx = sorted(set(int(i) for i in keep))
    if not idx:
        raise EmptySubset("keep must be nonempty", operation="reduced_model")
    if any(i < 0 or i >= m.K for i in idx):
        raise IndexOutOfRange(f"keep={idx} outside K={m.K}", operation="reduced_model")
    if len(idx) == m.K:
        raise FullSubset("keep must be a proper subset", operation="reduced_model")
    alpha = float(m.rho[idx].sum())
    rho = m.rho[idx] / alpha
    S = alpha * m.S[np.ix_(idx, idx)]
    return validate({"K": len(idx), "rho": rho, "S": S, "prior": m.prior})


def t_for_snr(
    build: Callable[[float], ModelParams],
    target: float,
    lo: float,
    hi: float,
    *,
    tol: float = 1e-13,
) -> float:
    """Bisection for the parameter ``t`` at which ``snr(build(t)) == target``.

    ``snr(build(t))`` must be increasing on ``[lo, hi]``, which holds for any
    single entry of S.
    """
    f_lo = snr(build(lo)) - target
    f_hi = snr(build(hi)) - target
    # the target can sit at the end of the admissible range (e.g. s_kl -> 0)
    if abs(f_lo) <= 1e-12:
        return lo
    if abs(f_hi) <= 1e-12:
        return hi
    if f_lo > 0 or f_hi < 0:
        raise ValueError(f"target snr {target} not bracketed by t in [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if snr(build(mid)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)
