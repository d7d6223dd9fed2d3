"""Limiting predictions: phase, outlier location, overlap constant and overlaps."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

from . import linalg, qve
from .errors import CriticalPhase, NotSupercritical, SignAnomaly
from .model import ModelParams, gamma, omega

__all__ = [
    "Phase",
    "TheoryPrediction",
    "SpectralDecomp",
    "OverlapConstant",
    "Phi1Derivative",
    "phase",
    "g_at_one",
    "spike_eigvectors",
    "spectral_decomp",
    "overlap_constant",
    "phi1_derivative",
    "predict",
]

PHASE_TOL = 1e-9
FD_STEP = 1e-5
EIG_RESIDUAL_TOL = 1e-9


class Phase(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigen-structure of ``D_g Omega`` (decreasing eigenvalues)."""

    phi: NDArray[np.float64]
    w_right: NDArray[np.float64]
    w_left: NDArray[np.float64]


@dataclass(frozen=True)
class OverlapConstant:
    C: float
    y_pos: NDArray[np.float64]
    # same quadratic form with y = (Gamma - D^-2)^-1 1, i.e. the other sign
    C_alt_sign: float


@dataclass(frozen=True)
class Phi1Derivative:
    finite_difference: float
    closed_form: float
    normalization: float  # <v_left, v_right>

    @property
    def normalized(self) -> float:
        """``-phi_1'(1) <v_left, v_right>``: the quantity that equals C."""
        return -self.finite_difference * self.normalization


@dataclass(frozen=True)
class TheoryPrediction:
    phase: Phase
    snr: float
    top_eig_limit: float
    right_edge: float
    g_at_one: NDArray[np.float64] | None
    C: float | None
    overlap_abs: NDArray[np.float64]
    overlap_global: float
    v_right: NDArray[np.float64] | None = None
    v_left: NDArray[np.float64] | None = None
    phi1prime: float | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def overlap_sq(self) -> NDArray[np.float64]:
        return self.overlap_abs**2

    def to_dict(self) -> dict[str, Any]:
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "phase": self.phase.value,
            "snr": self.snr,
            "topEigLimit": self.top_eig_limit,
            "rightEdge": self.right_edge,
            "gAtOne": arr(self.g_at_one),
            "C": self.C,
            "overlapAbs": arr(self.overlap_abs),
            "overlapSq": arr(self.overlap_sq),
            "overlapGlobal": self.overlap_global,
            "vRight": arr(self.v_right),
            "vLeft": arr(self.v_left),
            "phi1prime": self.phi1prime,
            "diagnostics": self.diagnostics,
        }


def phase(m: ModelParams, tol: float = PHASE_TOL) -> Phase:
    s = omega(m).snr
    if s < 1.0 - tol:
        return Phase.SUBCRITICAL
    if s > 1.0 + tol:
        return Phase.SUPERCRITICAL
    return Phase.CRITICAL


def _require_super(m: ModelParams, operation: str) -> None:
    if phase(m) is not Phase.SUPERCRITICAL:
        raise NotSupercritical(f"{operation} needs lambda_1(Omega) > 1", operation=operation)


def _solution_at_one(m: ModelParams) -> qve.RealLineSolution:
    return qve.solve_real(m, 1.0)


def g_at_one(m: ModelParams) -> NDArray[np.float64]:
    """``g(1)``: the all-ones vector below the transition, inside (0, 1)^K above it."""
    ph = phase(m)
    if ph is Phase.CRITICAL:
        raise CriticalPhase("g(1) sits on the spectral edge at the transition", operation="g_at_one")
    g = _solution_at_one(m).g
    if ph is Phase.SUBCRITICAL:
        if not np.allclose(g, 1.0, atol=1e-8, rtol=0.0):
            raise SignAnomaly(f"subcritical g(1)={g} differs from 1", operation="g_at_one")
        return np.ones(m.K)
    if not (np.all(g > 0.0) and np.all(g < 1.0)):
        raise SignAnomaly(f"supercritical g(1)={g} outside (0, 1)^K", operation="g_at_one")
    return g


def spike_eigvectors(m: ModelParams, g1: NDArray[np.float64] | None = None) -> tuple[NDArray, NDArray]:
    """Right and left eigenvectors of ``D_g(1) Omega`` for the eigenvalue 1."""
    _require_super(m, "spike_eigvectors")
    if g1 is None:
        g1 = g_at_one(m)
    Om = omega(m).entries
    v_right = np.sqrt(m.rho) * (1.0 - g1)
    v_left = Om @ v_right
    M = g1[:, None] * Om
    r_res = float(np.linalg.norm(M @ v_right - v_right))
    l_res = float(np.linalg.norm(M.T @ v_left - v_left))
    if r_res > EIG_RESIDUAL_TOL or l_res > EIG_RESIDUAL_TOL:
        raise SignAnomaly(
            f"eigen-residuals {r_res:.2e}, {l_res:.2e} exceed {EIG_RESIDUAL_TOL}",
            operation="spike_eigvectors",
        )
    return v_right, v_left


def spectral_decomp(m: ModelParams, g: NDArray[np.float64]) -> SpectralDecomp:
    """Eigen-structure of ``D_g Omega`` through ``D_sqrt(g) Omega D_sqrt(g)`` (needs g > 0)."""
    if np.any(g <= 0.0):
        raise ValueError("spectral_decomp needs g > 0")
    Om = omega(m).entries
    r = np.sqrt(g)
    eig = linalg.sym_eig(r[:, None] * Om * r[None, :])
    w_right = r[:, None] * eig.vectors
    w_left = eig.vectors / r[:, None]
    return SpectralDecomp(phi=eig.values, w_right=w_right, w_left=w_left)


def _phi1(m: ModelParams, lam: float) -> float:
    return float(spectral_decomp(m, qve.solve_real(m, lam).g).phi[0])


def overlap_constant(m: ModelParams, sol: qve.RealLineSolution | None = None) -> OverlapConstant:
    """Normalisation constant of the limiting overlap.

    ``C = <1 - g, Gamma^T D_(rho * y) Gamma (1 - g)>`` with
    ``y = (D_g^-2 - Gamma)^-1 1 = -g'(1)``, which is positive.
    """
    _require_super(m, "overlap_constant")
    if sol is None:
        sol = _solution_at_one(m)
    y_pos = -qve.g_prime(m, sol)
    if not np.all(y_pos > 0.0):
        raise SignAnomaly(f"-g'(1) = {y_pos} is not positive", operation="overlap_constant")
    G = gamma(m).entries
    d = 1.0 - sol.g
    Gd = G @ d
    C = float(Gd @ (m.rho * y_pos * Gd))
    C_alt = float(Gd @ (m.rho * (-y_pos) * Gd))
    return OverlapConstant(C=C, y_pos=y_pos, C_alt_sign=C_alt)


def phi1_derivative(m: ModelParams, h: float = FD_STEP) -> Phi1Derivative:
    """``phi_1'(1)`` for ``phi_1(lam) = lambda_1(D_g(lam) Omega)``.

    Central difference through two independent real-line solves, plus the
    first-variation formula ``<v_l, D_g' Omega v_r> / <v_l, v_r>``.
    """
    _require_super(m, "phi1_derivative")
    fd = (_phi1(m, 1.0 + h) - _phi1(m, 1.0 - h)) / (2.0 * h)
    sol = _solution_at_one(m)
    v_right, v_left = spike_eigvectors(m, sol.g)
    gp = qve.g_prime(m, sol)
    Om = omega(m).entries
    norm = float(v_left @ v_right)
    closed = float(v_left @ (gp * (Om @ v_right))) / norm
    return Phi1Derivative(finite_difference=float(fd), closed_form=closed, normalization=norm)


def predict(m: ModelParams, *, with_phi1: bool = True) -> TheoryPrediction:
    """Limiting top eigenvalue and overlap vector for the model."""
    ph = phase(m)
    s = omega(m).snr
    if ph is Phase.CRITICAL:
        return TheoryPrediction(
            phase=ph,
            snr=s,
            top_eig_limit=1.0,
            right_edge=1.0,
            g_at_one=np.ones(m.K),
            C=None,
            overlap_abs=np.zeros(m.K),
            overlap_global=0.0,
            diagnostics={"critical": True},
        )

    edge_info = qve.rightmost_edge(m)
    edge = edge_info.right_edge
    diag: dict[str, Any] = {
        "edgeResidual": edge_info.edge_residual,
        "edgeBracket": list(edge_info.right_bracket) if edge_info.right_bracket else None,
    }
    if ph is Phase.SUBCRITICAL:
        g1 = g_at_one(m)
        diag["secularAtOne"] = float(np.linalg.det(np.eye(m.K) - g1[:, None] * omega(m).entries))
        return TheoryPrediction(
            phase=ph,
            snr=s,
            top_eig_limit=edge,
            right_edge=edge,
            g_at_one=g1,
            C=None,
            overlap_abs=np.zeros(m.K),
            overlap_global=0.0,
            diagnostics=diag,
        )

    sol = _solution_at_one(m)
    g1 = g_at_one(m)
    v_right, v_left = spike_eigvectors(m, g1)
    oc = overlap_constant(m, sol)
    overlap = v_right / np.sqrt(oc.C)
    phi1 = phi1_derivative(m) if with_phi1 else None
    diag.update(
        {
            "qveResidualAtOne": sol.residual,
            "certificateTopEig": sol.certificate.top_eig,
            "secularAtOne": qve.secular(m, 1.0, sol),
            "yPos": [float(v) for v in oc.y_pos],
            "CAltSign": oc.C_alt_sign,
            "signConventionsAgreeInMagnitude": bool(np.isclose(abs(oc.C_alt_sign), oc.C, rtol=1e-12)),
        }
    )
    if phi1 is not None:
        diag["phi1primeClosedForm"] = phi1.closed_form
        diag["phi1Normalization"] = phi1.normalization
        diag["CFromPhi1"] = phi1.normalized
    return TheoryPrediction(
        phase=ph,
        snr=s,
        top_eig_limit=1.0,
        right_edge=edge,
        g_at_one=g1,
        C=oc.C,
        overlap_abs=overlap,
        overlap_global=float(overlap @ np.sqrt(m.rho)),
        v_right=v_right,
        v_left=v_left,
        phi1prime=phi1.finite_difference if phi1 is not None else None,
        diagnostics=diag,
    )
