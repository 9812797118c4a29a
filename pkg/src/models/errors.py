"""
Exception hierarchy for the capillary solver.

Every error carries a machine-readable ``kind`` so the pipelines can map a
failure to an exit code without inspecting messages.
"""

from typing import Any, Dict, List, Optional


class CapillaryError(Exception):
    """Base class for all solver, geometry and artifact errors."""

    kind: str = "capillary-error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        """Serializable summary used in reports."""
        return {"kind": self.kind, "message": self.message}


class InvalidArgumentError(CapillaryError, ValueError):
    """An argument is outside its documented range."""

    kind = "invalid-argument"


class UnsupportedModeError(CapillaryError, ValueError):
    """The requested grid mode cannot represent the problem."""

    kind = "unsupported-mode"


class InvalidDataError(CapillaryError, ValueError):
    """Input data are unusable (non-positive f, overflow, malformed file)."""

    kind = "invalid-data"


class InconsistentDataError(CapillaryError, ValueError):
    """The data violate the necessary orthogonality condition."""

    kind = "inconsistent-data"

    def __init__(self, message: str, alpha: int, defect: float, tolerance: float):
        super().__init__(message, alpha=alpha, defect=defect, tolerance=tolerance)
        self.alpha = alpha
        self.defect = defect
        self.tolerance = tolerance


class PreconditionViolationError(CapillaryError):
    """A documented precondition of an operation does not hold."""

    kind = "precondition-violation"


class EllipticityLostError(CapillaryError):
    """Some node spectrum of W left the Garding cone."""

    kind = "ellipticity-lost"

    def __init__(self, message: str, worst_node: int, spectrum: List[float]):
        super().__init__(message, worst_node=worst_node, spectrum=spectrum)
        self.worst_node = worst_node
        self.spectrum = spectrum


class NoConvergenceError(CapillaryError):
    """Newton hit its iteration cap; the best iterate is attached."""

    kind = "no-convergence"

    def __init__(self, message: str, best: Any = None, trace: Any = None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class ContinuationStuckError(CapillaryError):
    """The homotopy step fell below its floor."""

    kind = "continuation-stuck"

    def __init__(self, message: str, t_reached: float, last_solution: Any = None,
                 report: Optional[Any] = None):
        super().__init__(message, t_reached=t_reached)
        self.t_reached = t_reached
        self.last_solution = last_solution
        self.report = report


class ArtifactError(CapillaryError):
    """Reading or writing an artifact file failed."""

    kind = "artifact-io"

    def __init__(self, message: str, path: str):
        super().__init__(f"{message} ({path})", path=path)
        self.path = path
