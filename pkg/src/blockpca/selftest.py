"""Built-in property checks run by ``blockpca selftest``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import qve, theory
from .model import ModelParams, make_model, omega, reduced_model, snr

__all__ = ["Check", "random_model", "run_all", "CHECKS"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: str


def random_model(rng: np.random.Generator, K: int | None = None, target_snr: float | None = None) -> ModelParams:
    """Random K <= 4 model; S is rescaled so that snr equals ``target_snr`` when given."""
    if K is None:
        K = int(rng.integers(1, 5))
    rho = rng.dirichlet(np.full(K, 2.0))
    rho = np.maximum(rho, 0.02)
    rho /= rho.sum()
    A = rng.uniform(0.1, 3.0, size=(K, K))
    S = np.triu(A) + np.triu(A, 1).T
    m = make_model(rho, S)
    if target_snr is not None:
        m = make_model(m.rho, m.S * (target_snr / snr(m)))
    return m


def check_k1_oracle() -> Check:
    worst = 0.0
    for s in (0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 10.0):
        m = make_model([1.0], [[s]])
        edge = qve.rightmost_edge(m).right_edge
        worst = max(worst, abs(edge - (2 * np.sqrt(s) - s)))
        if s != 1.0:
            worst = max(worst, abs(theory.g_at_one(m)[0] - min(1.0, 1.0 / s)))
        if s > 1.0:
            p = theory.predict(m, with_phi1=False)
            worst = max(worst, abs(p.overlap_sq[0] - (1 - 1 / s)), abs(p.C - (s - 1) / s))
    return Check("K=1 closed forms (edge, g(1), overlap^2, C)", bool(worst <= 1e-8), f"max error {worst:.2e}")


def check_certificate(trials: int = 1000, seed: int = 11) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    done = 0
    while done < trials:
        m = random_model(rng)
        g = rng.uniform(0.05, 1.5, size=m.K) * rng.choice([-1.0, 1.0], size=m.K)
        a = np.abs(g)
        top = float(np.linalg.eigvalsh(a[:, None] * omega(m).entries * a[None, :])[-1])
        if abs(top - 1.0) <= 1e-9:
            continue
        y = np.linalg.solve(np.diag(g**-2.0) - m.S * m.rho[None, :], np.ones(m.K))
        bad += bool(np.all(y > 0)) != (top < 1.0)
        done += 1
    return Check("certificate: y > 0 <=> top eigenvalue < 1", bad == 0, f"{bad} counterexamples / {trials}")


def check_monotone(models: int = 100, seed: int = 12) -> Check:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(models):
        m = random_model(rng)
        base = snr(m)
        for k in range(m.K):
            for l in range(k, m.K):
                worst = min(worst, snr(m.with_entry(k, l, m.S[k, l] + 1e-6)) - base)
    return Check("snr increases with every s_kl", bool(worst > 0), f"min increment {worst:.3e}")


def check_reduced(models: int = 100, seed: int = 13) -> Check:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(models):
        m = random_model(rng, K=int(rng.integers(2, 5)))
        size = int(rng.integers(1, m.K))
        keep = rng.choice(m.K, size=size, replace=False)
        worst = min(worst, snr(m) - snr(reduced_model(m, keep)))
    return Check("reduced model has smaller snr", bool(worst > 0), f"min drop {worst:.3e}")


def check_edge_bound(models: int = 30, seed: int = 14) -> Check:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(models):
        m = random_model(rng, target_snr=float(rng.uniform(0.2, 5.0)))
        worst = max(worst, qve.rightmost_edge(m).right_edge)
    return Check("rightmost edge <= 1", bool(worst <= 1 + 1e-8), f"max edge {worst:.10f}")


CHECKS: tuple[Callable[[], Check], ...] = (
    check_k1_oracle,
    check_certificate,
    check_monotone,
    check_reduced,
    check_edge_bound,
)


def run_all() -> list[Check]:
    return [c() for c in CHECKS]
