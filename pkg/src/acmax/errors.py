"""Exception types shared across the library.

Every error carries a short machine-readable ``name`` so front-ends
(CLI, report writers) can surface failures without parsing messages.
"""

from __future__ import annotations


class AcmaxError(Exception):
    """Base class for all library errors."""

    name = "AcmaxError"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        return f"{self.name}: {base}" if base else self.name


class GridTooCoarse(AcmaxError):
    name = "GridTooCoarse"


class GridMismatch(AcmaxError):
    name = "GridMismatch"


class BadDensity(AcmaxError):
    name = "BadDensity"


class FrameDegenerate(AcmaxError):
    name = "FrameDegenerate"


class UnsupportedDegree(AcmaxError):
    name = "UnsupportedDegree"


class DegreeMismatch(AcmaxError):
    name = "DegreeMismatch"


class NotPositive(AcmaxError):
    """Tilted metric lost positive definiteness somewhere on the grid."""

    name = "NotPositive"

    def __init__(self, point, eigenvalue, message=""):
        self.point = tuple(int(i) for i in point)
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            message
            or f"min eigenvalue {self.eigenvalue:.6g} at grid point {self.point}"
        )


class KernelSignChange(AcmaxError):
    name = "KernelSignChange"


class NoConvergence(AcmaxError):
    name = "NoConvergence"


class LinearNoConvergence(AcmaxError):
    name = "LinearNoConvergence"


class Incompatible(AcmaxError):
    name = "Incompatible"


class PathStalled(AcmaxError):
    name = "PathStalled"


class FlowNoConvergence(AcmaxError):
    name = "FlowNoConvergence"


class DegenerateTopEigenvalue(AcmaxError):
    name = "DegenerateTopEigenvalue"


class NonPSDInput(AcmaxError):
    name = "NonPSDInput"


class ConfigError(AcmaxError):
    name = "ConfigError"
