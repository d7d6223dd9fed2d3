"""Quadratic vector equation for the block variance profile.

The per-block Stieltjes components ``g(z)`` solve

    1 = z g_k - g_k (Gamma (g - 1))_k,        k = 1..K,

with ``Im g_k > 0`` whenever ``Im z < 0``.  Off the real axis we iterate the
damped map ``g <- 1 / (z + Gamma (1 - g))`` and polish with Newton; towards
the real axis we continue in the imaginary offset ``eta``.  On the real line a
real root is accepted only with a positive selection certificate.

Everything below works on batches: ``g`` has shape ``(n, K)`` and ``z`` shape
``(n,)`` so a whole density grid is advanced at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import linalg
from .errors import (
    BracketFailure,
    CertificateRejected,
    InsideSupport,
    NoConvergence,
    Singular,
    SingularJacobian,
    SingularSystem,
)
from .model import ModelParams, gamma, omega

__all__ = [
    "ETA_SCHEDULE",
    "QveSolution",
    "RealLineSolution",
    "SelectionCertificate",
    "DensityCurve",
    "SupportInfo",
    "qve_residual",
    "solve_complex",
    "stieltjes",
    "density",
    "default_grid",
    "solve_real",
    "selection_certificate",
    "g_prime",
    "rightmost_edge",
    "leftmost_edge",
    "support",
    "secular",
]

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12
NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 50
NEWTON_HALVINGS = 12
FP_MAX_ITER = 5000
FP_HANDOFF = 1e-6
ETA_SCHEDULE = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7, 3e-8, 1e-8, 3e-9, 1e-9)
# Bootstrap levels in front of the schedule so the first damped iteration
# never starts close to the real axis.
BOOTSTRAP_ETAS = (1.0, 0.3, 0.1, 0.03)
INSIDE_PROBE_ETA = 1e-7
INSIDE_IM_THRESHOLD = 1e-4
BOUNDARY_TOL = 1e-9
EDGE_TOL = 1e-8
EDGE_PROBE = 1e-6
GRID_POINTS = 2000


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QveSolution:
    z: complex
    g: NDArray[np.complex128]
    gX: complex
    residual: float
    iterations: int
    eta: float


@dataclass(frozen=True)
class SelectionCertificate:
    y: NDArray[np.float64]
    top_eig: float
    accepted: bool
    boundary: bool = False


@dataclass(frozen=True)
class RealLineSolution:
    lam: float
    g: NDArray[np.float64]
    certificate: SelectionCertificate
    residual: float
    im_probe: float = 0.0


@dataclass(frozen=True)
class DensityCurve:
    grid: NDArray[np.float64]
    density: NDArray[np.float64]
    component_densities: NDArray[np.float64]  # shape (K, n)
    eta: float
    g: NDArray[np.complex128]  # shape (n, K)
    residual: NDArray[np.float64]
    flagged: NDArray[np.bool_]

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def cdf(self) -> NDArray[np.float64]:
        """Trapezoid-integrated CDF on ``grid``, starting at 0."""
        d = np.clip(self.density, 0.0, None)
        inc = 0.5 * (d[1:] + d[:-1]) * np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(inc)])


@dataclass(frozen=True)
class SupportInfo:
    right_edge: float
    left_edge: float | None = None
    intervals: list[tuple[float, float]] = field(default_factory=list)
    edge_residual: float = float("nan")
    right_bracket: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "rightEdge": self.right_edge,
            "leftEdge": self.left_edge,
            "intervals": [list(iv) for iv in self.intervals],
            "edgeResidual": None if np.isnan(self.edge_residual) else self.edge_residual,
            "rightBracket": list(self.right_bracket) if self.right_bracket else None,
        }


# ---------------------------------------------------------------------------
# Batched kernels
# ---------------------------------------------------------------------------


def _defect(G: NDArray, z: NDArray, g: NDArray) -> tuple[NDArray, NDArray]:
    """Return ``F = g (z + Gamma (1 - g)) - 1`` and the bracket ``z + Gamma (1 - g)``."""
    a = z[:, None] + (1.0 - g) @ G.T
    return g * a - 1.0, a


def _rownorm(F: NDArray) -> NDArray[np.float64]:
    return np.max(np.abs(F), axis=1)


def qve_residual(m: ModelParams, z: complex | ArrayLike, g: ArrayLike) -> NDArray[np.float64] | float:
    """Max-norm defect of the QVE at ``(z, g)``; scalar in, scalar out."""
    G = gamma(m).entries
    z_arr = np.atleast_1d(np.asarray(z))
    g_arr = np.atleast_2d(np.asarray(g))
    F, _ = _defect(G, z_arr, g_arr)
    r = _rownorm(F)
    return float(r[0]) if np.ndim(z) == 0 else r


def _solve_stack(J: NDArray, F: NDArray) -> NDArray:
    try:
        return np.linalg.solve(J, F[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(F)
        for i in range(F.shape[0]):
            out[i] = np.linalg.lstsq(J[i], F[i], rcond=None)[0]
        return out


def _newton(
    G: NDArray, z: NDArray, g: NDArray, *, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER
) -> tuple[NDArray, NDArray[np.float64], NDArray[np.int64]]:
    """Backtracking Newton on the QVE defect for each row independently.

    A row stops once its residual is below ``tol`` or a halved step no longer
    reduces the residual (machine precision reached or no nearby root).
    """
    g = np.array(g, copy=True)
    n, K = g.shape
    F, a = _defect(G, z, g)
    res = _rownorm(F)
    iters = np.zeros(n, dtype=np.int64)
    active = res > tol
    diag = np.arange(K)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        gi, ai, Fi, zi = g[idx], a[idx], F[idx], z[idx]
        J = -gi[:, :, None] * G[None, :, :]
        J[:, diag, diag] += ai
        step = _solve_stack(J, Fi)
        t = np.ones(idx.size)
        done = np.zeros(idx.size, dtype=bool)
        new_g = gi.copy()
        new_F = Fi.copy()
        new_a = ai.copy()
        new_res = res[idx].copy()
        for _ in range(NEWTON_HALVINGS):
            todo = ~done
            if not todo.any():
                break
            trial = gi[todo] - t[todo, None] * step[todo]
            Ft, at = _defect(G, zi[todo], trial)
            rt = _rownorm(Ft)
            better = np.isfinite(rt) & (rt < res[idx][todo])
            sel = np.flatnonzero(todo)[better]
            new_g[sel], new_F[sel], new_a[sel], new_res[sel] = trial[better], Ft[better], at[better], rt[better]
            done[sel] = True
            t[todo] *= 0.5
        g[idx], F[idx], a[idx] = new_g, new_F, new_a
        res[idx] = new_res
        iters[idx] += 1
        still = done & (new_res > tol)
        active[idx] = still
    return g, res, iters


def _fixed_point(
    G: NDArray, z: NDArray, g: NDArray, *, tol: float = FP_HANDOFF, max_iter: int = FP_MAX_ITER
) -> tuple[NDArray, NDArray[np.float64], NDArray[np.int64]]:
    """Damped iteration of ``g <- 1 / (z + Gamma (1 - g))``.

    The damping factor starts at 0.5, halves on a residual increase (step
    rejected) and grows by 1.2 after five consecutive decreases.
    """
    g = np.array(g, copy=True)
    n = g.shape[0]
    alpha = np.full(n, 0.5)
    streak = np.zeros(n, dtype=np.int64)
    iters = np.zeros(n, dtype=np.int64)
    F, _ = _defect(G, z, g)
    res = _rownorm(F)
    for _ in range(max_iter):
        idx = np.flatnonzero(res > tol)
        if idx.size == 0:
            break
        gi = g[idx]
        mapped = 1.0 / (z[idx, None] + (1.0 - gi) @ G.T)
        cand = (1.0 - alpha[idx, None]) * gi + alpha[idx, None] * mapped
        Fc, _ = _defect(G, z[idx], cand)
        rc = _rownorm(Fc)
        up = ~(rc <= res[idx])
        down = ~up
        acc = idx[down]
        g[acc] = cand[down]
        res[acc] = rc[down]
        streak[acc] += 1
        grow = acc[streak[acc] >= 5]
        alpha[grow] = np.minimum(1.0, 1.2 * alpha[grow])
        streak[grow] = 0
        rej = idx[up]
        alpha[rej] = np.maximum(alpha[rej] * 0.5, 1e-6)
        streak[rej] = 0
        iters[idx] += 1
    return g, res, iters


def _herglotz_ok(g: NDArray) -> NDArray[np.bool_]:
    return np.all(g.imag > 0.0, axis=1)


def _solve_level(
    G: NDArray, z: NDArray, g0: NDArray, *, cold: bool
) -> tuple[NDArray, NDArray, NDArray, NDArray[np.bool_]]:
    it_fp = np.zeros(z.size, dtype=np.int64)
    if cold:
        g0, _, it_fp = _fixed_point(G, z, g0)
    g, res, it = _newton(G, z, g0)
    ok = (res <= RESIDUAL_TOL) & _herglotz_ok(g)
    return g, res, it + it_fp, ok


def _continue(
    G: NDArray,
    x: NDArray[np.float64],
    etas: Sequence[float],
    *,
    max_split: int = 4,
    record: Sequence[float] = (),
) -> tuple[NDArray, NDArray, NDArray, NDArray[np.bool_], dict[float, NDArray]]:
    """Vertical continuation: solve at ``x - i eta`` for each eta in turn.

    Every level warm-starts from the previous one at the same abscissa.  Rows
    that fail a level are retried through geometric sub-levels; persistent
    failures keep their best iterate and are flagged.  ``record`` lists eta
    levels whose solutions should be returned as well.
    """
    n = x.size
    K = G.shape[0]
    etas = list(etas)
    if etas[0] < BOOTSTRAP_ETAS[0]:
        etas = [e for e in BOOTSTRAP_ETAS if e > etas[0]] + etas
    z = x - 1j * etas[0]
    g = np.repeat((1.0 / z)[:, None], K, axis=1)
    g, res, iters, ok = _solve_level(G, z, g, cold=True)
    if not ok.all():
        # neighbour sweep: warm start from the left neighbour that succeeded
        for i in np.flatnonzero(~ok):
            j = i - 1 if i > 0 else i + 1
            if 0 <= j < n and ok[j]:
                gi, ri, it_i, ok_i = _solve_level(G, z[i : i + 1], g[j : j + 1], cold=False)
                if ok_i[0]:
                    g[i], res[i], ok[i] = gi[0], ri[0], True
                    iters[i] += it_i[0]
    flagged = ~ok
    saved: dict[float, NDArray] = {}
    prev_eta = etas[0]
    for eta in etas[1:]:
        z = x - 1j * eta
        g_new, res_new, it, ok = _solve_level(G, z, g, cold=False)
        iters += it
        bad = np.flatnonzero(~ok)
        if bad.size:
            g_new[bad], res_new[bad], ok_b, it_b = _refine(G, x[bad], g[bad], prev_eta, eta, max_split)
            ok[bad] = ok_b
            iters[bad] += it_b
        flagged |= ~ok
        g, res = g_new, res_new
        prev_eta = eta
        for r in record:
            if np.isclose(eta, r, rtol=1e-9, atol=0.0):
                saved[r] = g.copy()
    return g, res, iters, flagged, saved


def _refine(
    G: NDArray, x: NDArray, g: NDArray, eta_from: float, eta_to: float, depth: int
) -> tuple[NDArray, NDArray, NDArray[np.bool_], NDArray]:
    ratio = (eta_to / eta_from) ** 0.25
    sub = [eta_from * ratio**k for k in range(1, 5)]
    iters = np.zeros(x.size, dtype=np.int64)
    ok = np.ones(x.size, dtype=bool)
    res = np.zeros(x.size)
    prev = eta_from
    for eta in sub:
        z = x - 1j * eta
        g_new, res_new, it, ok_l = _solve_level(G, z, g, cold=False)
        iters += it
        bad = np.flatnonzero(~ok_l)
        if bad.size and depth > 0:
            g_new[bad], res_new[bad], ok_b, it_b = _refine(G, x[bad], g[bad], prev, eta, depth - 1)
            ok_l[bad] = ok_b
            iters[bad] += it_b
        ok &= ok_l
        g, res = g_new, res_new
        prev = eta
    return g, res, ok, iters


# ---------------------------------------------------------------------------
# Off the real axis
# ---------------------------------------------------------------------------


def solve_complex(m: ModelParams, z: complex, warm_start: ArrayLike | None = None) -> QveSolution:
    """Herglotz solution of the QVE at a point of the lower half-plane."""
    z = complex(z)
    if not z.imag < 0.0:
        raise ValueError(f"solve_complex needs Im z < 0, got {z}")
    G = gamma(m).entries
    zz = np.array([z])
    eta = -z.imag
    if warm_start is not None:
        g0 = np.asarray(warm_start, dtype=np.complex128).reshape(1, m.K)
        g, res, it, ok = _solve_level(G, zz, g0, cold=False)
        if ok[0]:
            return QveSolution(z, g[0], complex(m.rho @ g[0]), float(res[0]), int(it[0]), eta)
    ok = np.zeros(1, dtype=bool)
    if eta >= BOOTSTRAP_ETAS[-1]:
        g0 = np.full((1, m.K), 1.0 / z)
        g, res, it, ok = _solve_level(G, zz, g0, cold=True)
    if not ok[0] and eta < BOOTSTRAP_ETAS[0]:
        # a cold start can land on a non-Herglotz root; walk down from large eta instead
        etas = [e for e in (*BOOTSTRAP_ETAS, *ETA_SCHEDULE) if e > eta] + [eta]
        g, res, it, flagged, _ = _continue(G, np.array([z.real]), etas)
        ok = ~flagged & (res <= RESIDUAL_TOL)
    if not ok[0]:
        raise NoConvergence(
            f"QVE did not converge at z={z} (residual {res[0]:.2e})",
            operation="solve_complex",
            g=g[0],
            residual=float(res[0]),
        )
    return QveSolution(z, g[0], complex(m.rho @ g[0]), float(res[0]), int(it[0]), eta)


def stieltjes(m: ModelParams, z: complex) -> complex:
    """Aggregate transform ``sum_k rho_k g_k(z)``; the upper half-plane uses reflection."""
    z = complex(z)
    if z.imag > 0.0:
        return solve_complex(m, z.conjugate()).gX.conjugate()
    return solve_complex(m, z).gX


# ---------------------------------------------------------------------------
# Density
# ---------------------------------------------------------------------------


def _gamma_bounds(m: ModelParams) -> tuple[float, float]:
    """Crude interval containing the support (variance-profile norm bound)."""
    row = m.S @ m.rho
    r = float(np.max(row))
    return -r - 2.0 * np.sqrt(r) - 0.5, 2.0 * np.sqrt(r) - float(np.min(row)) + 0.5


def default_grid(m: ModelParams, count: int = GRID_POINTS, info: SupportInfo | None = None) -> NDArray[np.float64]:
    """``count`` points on ``[left - 0.1, max(1, right) + 0.2]``."""
    if info is None:
        info = support(m, with_intervals=False)
    left = info.left_edge if info.left_edge is not None else _gamma_bounds(m)[0]
    return np.linspace(left - 0.1, max(1.0, info.right_edge) + 0.2, count)


def schedule_to(eta_min: float) -> list[float]:
    """Default continuation schedule truncated at (and ending with) ``eta_min``."""
    out = [e for e in ETA_SCHEDULE if e > eta_min * (1 + 1e-9)]
    return out + [eta_min]


def density(m: ModelParams, grid: ArrayLike, eta_schedule: Sequence[float] | None = None) -> DensityCurve:
    """Limiting spectral density ``Im g_X(x - i eta_min) / pi`` on ``grid``."""
    x = np.asarray(grid, dtype=np.float64)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("grid must be a strictly ascending 1-d array with at least two points")
    etas = list(eta_schedule) if eta_schedule is not None else schedule_to(1e-7)
    if np.any(np.diff(etas) >= 0) or etas[-1] <= 0:
        raise ValueError("eta schedule must be positive and strictly decreasing")
    G = gamma(m).entries
    g, res, _, flagged, _ = _continue(G, x, etas)
    comp = (g.imag / np.pi).T
    dens = m.rho @ comp
    if flagged.any():
        log.warning("density: %d grid points did not converge", int(flagged.sum()))
    return DensityCurve(
        grid=x,
        density=dens,
        component_densities=comp,
        eta=float(etas[-1]),
        g=g,
        residual=res,
        flagged=flagged,
    )


def support_intervals(curve: DensityCurve, threshold: float = 1e-6) -> list[tuple[float, float]]:
    """Maximal runs of grid points where the density exceeds ``threshold``."""
    on = curve.density > threshold
    out: list[tuple[float, float]] = []
    i = 0
    n = on.size
    while i < n:
        if on[i]:
            j = i
            while j + 1 < n and on[j + 1]:
                j += 1
            out.append((float(curve.grid[i]), float(curve.grid[j])))
            i = j + 1
        else:
            i += 1
    return out


# ---------------------------------------------------------------------------
# Real line
# ---------------------------------------------------------------------------


def _top_eig_sym(Om: NDArray, g: NDArray) -> float:
    a = np.abs(g)
    return float(linalg.sym_eig(a[:, None] * Om * a[None, :]).values[0])


def selection_certificate(m: ModelParams, g: ArrayLike) -> SelectionCertificate:
    """Positivity test for a real QVE root.

    ``y`` solves ``(D_g^-2 - Gamma) y = 1``; the root is the physical one iff
    ``y > 0``, equivalently ``lambda_1(D_|g| Omega D_|g|) < 1``.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (m.K,) or np.any(g == 0.0):
        raise ValueError("selection_certificate needs a length-K vector with nonzero entries")
    G = gamma(m).entries
    Om = omega(m).entries
    top = _top_eig_sym(Om, g)
    boundary = abs(top - 1.0) <= BOUNDARY_TOL
    try:
        y = np.real(linalg.solve_linear(np.diag(g**-2.0) - G, np.ones(m.K)))
    except Singular as exc:
        if not boundary:
            raise SingularSystem(
                "certificate system is singular", operation="selection_certificate", top_eig=top
            ) from exc
        y = np.full(m.K, np.nan)
    if boundary:
        return SelectionCertificate(y=y, top_eig=top, accepted=True, boundary=True)
    return SelectionCertificate(y=y, top_eig=top, accepted=bool(top < 1.0 and np.all(y > 0.0)))


def _real_newton(G: NDArray, lam: float, g0: NDArray) -> tuple[NDArray, float]:
    """Single-row version of :func:`_newton` on the real line, same stopping rules.

    The edge finder calls this hundreds of times, so it skips the batching.
    """
    g = np.array(g0, dtype=np.float64)
    a = lam + G @ (1.0 - g)
    F = g * a - 1.0
    res = float(np.max(np.abs(F)))
    for _ in range(NEWTON_MAX_ITER):
        if not res > NEWTON_TOL:
            break
        J = np.diag(a) - g[:, None] * G
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        for _ in range(NEWTON_HALVINGS):
            trial = g - t * step
            at = lam + G @ (1.0 - trial)
            Ft = trial * at - 1.0
            rt = float(np.max(np.abs(Ft)))
            if np.isfinite(rt) and rt < res:
                g, a, F, res = trial, at, Ft, rt
                break
            t *= 0.5
        else:
            break
    return g, res


def solve_real(m: ModelParams, lam: float) -> RealLineSolution:
    """Real continuation ``g(lam)`` at a point outside the support.

    Continue in eta down to 1e-9 at fixed abscissa, then polish the real part
    with Newton on ``g_k (lam + (Gamma (1 - g))_k) - 1`` and certify the root.
    """
    lam = float(lam)
    G = gamma(m).entries
    etas = list(ETA_SCHEDULE)
    g_c, _, _, _, saved = _continue(G, np.array([lam]), etas, record=(INSIDE_PROBE_ETA,))
    probe = saved.get(INSIDE_PROBE_ETA, g_c)[0]
    im_probe = float(m.rho @ probe.imag)
    g, res = _real_newton(G, lam, g_c[0].real)
    converged = res <= RESIDUAL_TOL and np.all(np.isfinite(g)) and np.all(g != 0.0)
    cert = None
    if converged:
        try:
            cert = selection_certificate(m, g)
        except SingularSystem:
            cert = None
    if cert is not None and cert.accepted:
        return RealLineSolution(lam=lam, g=g, certificate=cert, residual=res, im_probe=im_probe)
    if im_probe > INSIDE_IM_THRESHOLD:
        raise InsideSupport(
            f"lambda={lam} lies inside the support (Im g_X = {im_probe:.3e})",
            operation="solve_real",
            im=im_probe,
        )
    if converged:
        raise CertificateRejected(
            f"real root at lambda={lam} is not the physical branch",
            operation="solve_real",
            g=g,
            certificate=cert,
        )
    raise NoConvergence(
        f"real Newton polish failed at lambda={lam} (residual {res:.2e})",
        operation="solve_real",
        g=g,
        residual=res,
    )


def g_prime(m: ModelParams, sol: RealLineSolution) -> NDArray[np.float64]:
    """Derivative ``g'(lam) = (Gamma - D_g^-2)^-1 1`` from the inverse function theorem."""
    if not sol.certificate.accepted or sol.certificate.boundary:
        raise SingularJacobian("g' undefined at a boundary or rejected root", operation="g_prime")
    G = gamma(m).entries
    try:
        return np.real(linalg.solve_linear(G - np.diag(sol.g**-2.0), np.ones(m.K)))
    except Singular as exc:
        raise SingularJacobian("QVE Jacobian is singular", operation="g_prime") from exc


def secular(m: ModelParams, lam: float, sol: RealLineSolution | None = None) -> float:
    """``det(I - D_g(lam) Omega)``; its zeros outside the bulk locate outliers."""
    if sol is None:
        sol = solve_real(m, lam)
    Om = omega(m).entries
    return float(np.linalg.det(np.eye(m.K) - sol.g[:, None] * Om))


# ---------------------------------------------------------------------------
# Edges
# ---------------------------------------------------------------------------


class _Branch:
    """Tracks the real physical branch from outside the support.

    ``sign=+1`` follows the right branch (``g > 0``, increasing as lambda
    decreases); ``sign=-1`` the left one.  A candidate point is accepted only
    if Newton converges, the sign pattern holds, the certificate eigenvalue
    stays below one and both ``sign * g`` and that eigenvalue have moved
    monotonically towards the support.
    """

    def __init__(self, m: ModelParams, sign: int):
        self.G = gamma(m).entries
        self.Om = omega(m).entries
        self.sign = sign

    def step(self, lam: float, g_from: NDArray, top_from: float) -> tuple[NDArray, float] | None:
        g, res = _real_newton(self.G, lam, g_from)
        if not (res <= RESIDUAL_TOL and np.all(np.isfinite(g))):
            return None
        if not np.all(self.sign * g > 0.0):
            return None
        top = _top_eig_sym(self.Om, g)
        if not top < 1.0 - 1e-14:
            return None
        slack = 1e-12 * (1.0 + np.abs(g_from))
        if np.any(self.sign * (g - g_from) < -slack) or top < top_from - 1e-12:
            return None
        return g, top

    def reach(self, lam_from: float, g_from: NDArray, top_from: float, lam_to: float, substeps: int = 8):
        """Try a direct jump, then a geometric ladder of ``substeps`` points."""
        hit = self.step(lam_to, g_from, top_from)
        if hit is not None:
            return hit
        g, top, lam = g_from, top_from, lam_from
        for k in range(1, substeps + 1):
            nxt = lam_from + (lam_to - lam_from) * (1.0 - 0.5**k if k < substeps else 1.0)
            hit = self.step(nxt, g, top)
            if hit is None:
                return None
            g, top = hit
            lam = nxt
        return g, top

    def fold(self, lam0: float, g0: NDArray) -> tuple[float, NDArray] | None:
        """Newton on ``F(g, lam) = 0`` with ``lambda_1(D_g Omega D_g) = 1``."""
        G, Om, K = self.G, self.Om, self.G.shape[0]
        u = np.concatenate([g0, [lam0]])
        for _ in range(60):
            g, lam = u[:K], u[K]
            a = lam + G @ (1.0 - g)
            F = g * a - 1.0
            M = np.abs(g)[:, None] * Om * np.abs(g)[None, :]
            eig = linalg.sym_eig(M)
            tau, v = eig.values[0], eig.vectors[:, 0]
            R = np.concatenate([F, [tau - 1.0]])
            if np.max(np.abs(R)) < 1e-14:
                break
            J = np.zeros((K + 1, K + 1))
            J[:K, :K] = np.diag(a) - g[:, None] * G
            J[:K, K] = g
            # d tau / d g_k = 2 v_k (Omega D_g v)_k for g of fixed sign
            J[K, :K] = 2.0 * v * (Om @ (np.abs(g) * v)) * np.sign(g)
            try:
                du = np.linalg.solve(J, R)
            except np.linalg.LinAlgError:
                return None
            u = u - du
            if not np.all(np.isfinite(u)):
                return None
        g, lam = u[:K], float(u[K])
        if np.max(np.abs(R)) > 1e-11 or not np.all(self.sign * g > 0.0):
            return None
        return lam, g


def _edge(m: ModelParams, sign: int, bracket: tuple[float, float] | None, tol: float):
    br = _Branch(m, sign)
    lo_b, hi_b = _gamma_bounds(m)
    if bracket is None:
        bracket = (lo_b, hi_b)
    inside, outside = (bracket[0], bracket[1]) if sign > 0 else (bracket[1], bracket[0])

    def anchor(lam: float):
        try:
            sol = solve_real(m, lam)
        except (InsideSupport, CertificateRejected, NoConvergence):
            return None
        if not np.all(sign * sol.g > 0.0):
            return None
        return sol.g, sol.certificate.top_eig

    start = anchor(outside)
    width = abs(outside - inside)
    if start is None:
        outside = outside + sign * width
        start = anchor(outside)
    probe = br.reach(outside, start[0], start[1], inside) if start is not None else None
    if probe is not None:
        inside = inside - sign * width
        probe = br.reach(outside, start[0], start[1], inside)
    if start is None or probe is not None:
        raise BracketFailure(
            f"edge not bracketed by {bracket}",
            operation="rightmost_edge" if sign > 0 else "leftmost_edge",
        )

    good_lam, (good_g, good_top) = outside, start
    bad_lam = inside

    def bisect_to(width: float) -> None:
        nonlocal good_lam, good_g, good_top, bad_lam
        while abs(good_lam - bad_lam) > width:
            mid = 0.5 * (good_lam + bad_lam)
            hit = br.reach(good_lam, good_g, good_top, mid)
            if hit is None:
                bad_lam = mid
            else:
                good_lam, (good_g, good_top) = mid, hit

    # Coarse bisection, then try to certify the fold root with a bracket of
    # width 2 * tol around it; fall back to plain bisection otherwise.
    bisect_to(max(tol, 1e-3))
    polished = br.fold(good_lam, good_g)
    edge = None
    if polished is not None:
        cand = polished[0]
        lo_c, hi_c = cand - sign * tol, cand + sign * tol
        between = min(good_lam, bad_lam) - tol <= cand <= max(good_lam, bad_lam) + tol
        if between:
            hit = br.reach(good_lam, good_g, good_top, hi_c)
            if hit is not None and br.reach(hi_c, hit[0], hit[1], lo_c) is None:
                good_lam, (good_g, good_top), bad_lam = hi_c, hit, lo_c
                edge = cand
    if edge is None:
        bisect_to(tol)
        edge = good_lam
    return edge, (min(good_lam, bad_lam), max(good_lam, bad_lam)), br


def rightmost_edge(
    m: ModelParams, bracket: tuple[float, float] | None = None, tol: float = EDGE_TOL
) -> SupportInfo:
    """Rightmost edge of the limiting spectral density.

    Bisection on "the real branch continued from the right survives at
    lambda with an accepted certificate", to ``tol``; then Newton on the fold
    system sharpens the result inside the final bracket.
    """
    edge, br_int, _ = _edge(m, +1, bracket, tol)
    try:
        resid = abs(1.0 - solve_real(m, edge + EDGE_PROBE).certificate.top_eig)
    except (InsideSupport, CertificateRejected, NoConvergence):
        resid = float("nan")
    return SupportInfo(right_edge=float(edge), edge_residual=float(resid), right_bracket=br_int)


def leftmost_edge(m: ModelParams, bracket: tuple[float, float] | None = None, tol: float = EDGE_TOL) -> float:
    edge, _, _ = _edge(m, -1, bracket, tol)
    return float(edge)


def support(m: ModelParams, *, with_intervals: bool = True, grid_points: int = 800) -> SupportInfo:
    """Both edges plus the support intervals read off a density curve."""
    right = rightmost_edge(m)
    left = leftmost_edge(m)
    intervals: list[tuple[float, float]] = []
    if with_intervals:
        grid = np.linspace(left - 0.05, right.right_edge + 0.05, grid_points)
        intervals = support_intervals(density(m, grid, schedule_to(1e-7)))
    return SupportInfo(
        right_edge=right.right_edge,
        left_edge=left,
        intervals=intervals,
        edge_residual=right.edge_residual,
        right_bracket=right.right_bracket,
    )
