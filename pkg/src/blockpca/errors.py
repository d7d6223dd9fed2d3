"""Exception hierarchy.

Every error carries the module and operation that raised it so the CLI can
report the failing stage on stderr.
"""

from __future__ import annotations

from typing import Any


class BlockPCAError(Exception):
    module = "blockpca"

    def __init__(self, message: str, *, operation: str = "", **details: Any) -> None:
        super().__init__(message)
        self.operation = operation
        self.details = details


# -- model --------------------------------------------------------------------


class ModelError(BlockPCAError, ValueError):
    module = "model"


class BadK(ModelError):
    pass


class RhoNotSimplex(ModelError):
    pass


class NonSymmetricS(ModelError):
    pass


class NonPositiveEntry(ModelError):
    pass


class IndexOutOfRange(ModelError):
    pass


class EmptySubset(ModelError):
    pass


class FullSubset(ModelError):
    pass


# -- linalg -------------------------------------------------------------------


class LinalgError(BlockPCAError, ArithmeticError):
    module = "linalg"


class NonFinite(LinalgError):
    pass


class Singular(LinalgError):
    pass


class EigNoConvergence(LinalgError):
    pass


# -- qve ----------------------------------------------------------------------


class QveError(BlockPCAError, ArithmeticError):
    module = "qve"


class NoConvergence(QveError):
    """Raised with the best iterate attached as ``details['g']``."""


class InsideSupport(QveError):
    pass


class CertificateRejected(QveError):
    pass


class SingularSystem(QveError):
    pass


class SingularJacobian(QveError):
    pass


class BracketFailure(QveError):
    pass


# -- theory -------------------------------------------------------------------


class TheoryError(BlockPCAError, ArithmeticError):
    module = "theory"


class CriticalPhase(TheoryError):
    pass


class NotSupercritical(TheoryError):
    pass


class SignAnomaly(TheoryError):
    pass


# -- sim ----------------------------------------------------------------------


class SimError(BlockPCAError, ValueError):
    module = "sim"


class NTooSmall(SimError):
    pass


class GridTooCoarse(SimError):
    pass
