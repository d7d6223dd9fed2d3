"""Two-block reference models used by the figure-reproduction commands.

Each family fixes ``rho = (1/2, 1/2)`` and varies one entry ``t`` of S.  The
value of ``t`` realising a requested SNR is found by bisection on
``snr(t)``, which is increasing in every entry of S.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .model import ModelParams, make_model, t_for_snr

__all__ = ["Family", "FAMILIES", "FIG1_SNRS", "FIG2_SNRS", "family", "model_for_snr"]

FIG1_SNRS = (0.5, 1.0, 3.0)
FIG2_SNRS = (0.5, 0.7, 0.9, 1.3, 1.8, 2.3, 2.9, 3.5)


@dataclass(frozen=True)
class Family:
    name: str
    build: Callable[[float], ModelParams]
    t_lo: float
    t_hi: float
    entry: tuple[int, int]

    def model_for_snr(self, target: float) -> tuple[ModelParams, float]:
        t = t_for_snr(self.build, target, self.t_lo, self.t_hi)
        return self.build(t), t


def _diag_family(t: float) -> ModelParams:
    return make_model([0.5, 0.5], [[t, 0.5], [0.5, 0.25]])


def _diag_family_b(t: float) -> ModelParams:
    return make_model([0.5, 0.5], [[t, 0.5], [0.5, 0.5]])


def _offdiag_family(t: float) -> ModelParams:
    return make_model([0.5, 0.5], [[1.0, t], [t, 0.5]])


FAMILIES = {
    "fig1": Family("fig1", _diag_family, 1e-9, 100.0, (0, 0)),
    "fig2-left": Family("fig2-left", _diag_family_b, 1e-9, 100.0, (0, 0)),
    # snr(t) -> 1/2 as t -> 0 and s_kl must stay positive, so snr 1/2 maps to t = t_lo
    "fig2-right": Family("fig2-right", _offdiag_family, 1e-9, 100.0, (0, 1)),
}


def family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown model family {name!r}; expected one of {sorted(FAMILIES)}") from None


def model_for_snr(name: str, target: float) -> tuple[ModelParams, float]:
    return family(name).model_for_snr(target)
