from __future__ import annotations

import numpy as np
import pytest

from blockpca.model import ModelParams, make_model

_REPORT: list[str] = []


class Report:
    def __call__(self, criterion: str, passed: bool, measured: str) -> None:
        _REPORT.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {measured}")


@pytest.fixture(scope="session")
def report() -> Report:
    return Report()


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


def two_by_two_top(a: float, b: float, d: float) -> float:
    """Largest eigenvalue of [[a, b], [b, d]] in closed form."""
    return 0.5 * ((a + d) + np.sqrt((a - d) ** 2 + 4 * b * b))


def scalar_g(s: float, z: complex) -> complex:
    """Root of s g^2 - (z + s) g + 1 = 0 with Im g > 0 (Im z < 0)."""
    disc = np.sqrt(complex((z + s) ** 2 - 4 * s))
    roots = [((z + s) - disc) / (2 * s), ((z + s) + disc) / (2 * s)]
    return max(roots, key=lambda r: r.imag)


def rand_model(rng: np.random.Generator, K: int | None = None, snr_target: float | None = None) -> ModelParams:
    if K is None:
        K = int(rng.integers(1, 5))
    rho = rng.uniform(0.2, 1.0, size=K)
    rho /= rho.sum()
    A = rng.uniform(0.05, 4.0, size=(K, K))
    S = (A + A.T) / 2
    if snr_target is not None:
        top = np.linalg.eigvalsh(np.sqrt(np.outer(rho, rho)) * S)[-1]
        S *= snr_target / top
    return make_model(rho, S)


FIG1_T = {0.5: 2 / 3, 1.0: 13 / 7, 3.0: 137 / 23}


def fig1_model(t: float) -> ModelParams:
    return make_model([0.5, 0.5], [[t, 0.5], [0.5, 0.25]])
