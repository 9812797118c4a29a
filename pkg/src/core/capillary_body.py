"""
Capillary hypersurfaces reconstructed from their support functions.

X(xi) = grad h + h N(xi) with N = xi - cos(theta) e. The principal radii are
the eigenvalues of W, and the capillary area measures weight sigma_k of the
radii with ell.
"""

import logging
from math import comb
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..constants import STEINER_SAMPLES
from ..models.capillary_models import GridMode, MeasureReport
from ..models.errors import InvalidArgumentError, PreconditionViolationError, UnsupportedModeError
from .cap_geometry import (
    CapGrid,
    ScalarField,
    boundary_radial_derivative,
    boundary_values,
    covariant_gradient,
    ell_field,
    integrate,
    node_directions,
    tangent_frame,
    unit_normals,
)
from .hessian_operator import FieldLike, SupportField, build_W
from .symfunc import elementary_symmetric

logger = logging.getLogger(__name__)

# d/d rho at rho = theta from the last four rings, exact on cubics
_TANGENT_SLOPE_WEIGHTS = np.array([71.0, -141.0, 93.0, -23.0]) / 24.0

Mask = Optional[Union[np.ndarray, Sequence[int]]]


class CapillaryBody:
    """A reconstructed capillary hypersurface with per-node curvature data."""

    def __init__(self, h: SupportField, vertices: np.ndarray, radii: np.ndarray,
                 f: Optional[ScalarField] = None, k: Optional[int] = None):
        self.support = h
        self.grid: CapGrid = h.grid
        self.vertices = vertices
        self.radii = radii
        self.ell = ell_field(self.grid)
        self.f = f
        self.k = k
        for arr in (self.vertices, self.radii):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def theta(self) -> float:
        return self.grid.theta

    @property
    def curvatures(self) -> np.ndarray:
        """Reciprocal radii; nan at nodes with a non-positive radius."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.radii > 0.0, 1.0 / self.radii, np.nan)

    @property
    def strictly_convex(self) -> bool:
        return bool(np.all(self.radii > 0.0))

    def sigma(self, k: int) -> np.ndarray:
        """sigma_k of the principal radii at every node."""
        return elementary_symmetric(self.radii)[:, k]

    def volume(self) -> float:
        """Enclosed volume (n+1)^(-1) * integral of h sigma_n(W)."""
        integrand = ScalarField(self.grid, self.support.values * self.sigma(self.n))
        return integrate(integrand) / (self.n + 1)

    def surface_area(self) -> float:
        """Area of the curved part, integral of sigma_n(W)."""
        return integrate(ScalarField(self.grid, self.sigma(self.n)))

    def boundary_heights(self) -> np.ndarray:
        """Last coordinate of X on rho = theta, -sin(theta) h_rho + cos(theta) h, extrapolated."""
        h = self.support.h
        return (-np.sin(self.theta) * boundary_radial_derivative(h)
                + np.cos(self.theta) * boundary_values(h))

    def __repr__(self) -> str:
        return f"CapillaryBody({self.grid!r}, k={self.k})"


def _support(h: FieldLike) -> SupportField:
    return h if isinstance(h, SupportField) else SupportField(h)


def principal_radii(h: FieldLike) -> np.ndarray:
    """Ascending eigenvalues of W per node, shape (N, n)."""
    radii = np.array(build_W(h).eigenvalues())
    if np.any(radii <= 0.0):
        logger.warning(f"{int(np.sum(np.any(radii <= 0.0, axis=1)))} nodes have non-positive radii")
    return radii


def reconstruct_surface(h: FieldLike, f: Optional[ScalarField] = None,
                        k: Optional[int] = None) -> CapillaryBody:
    """
    Inverse capillary Gauss map X(xi) = grad h + h N(xi).

    Args:
        h: support function
        f: optional data stored alongside for exports
        k: optional order stored alongside for exports

    Returns:
        CapillaryBody
    """
    support = _support(h)
    grid = support.grid
    grad = covariant_gradient(support.h)
    frame = tangent_frame(grid)
    X = support.values[:, None] * unit_normals(grid)
    for a, e_a in enumerate(frame):
        X = X + grad[:, a][:, None] * e_a
    return CapillaryBody(support, X, principal_radii(support), f=f, k=k)


def _resolve_mask(grid: CapGrid, mask: Mask) -> Optional[np.ndarray]:
    if mask is None:
        return None
    arr = np.asarray(mask)
    if arr.dtype == bool:
        if arr.shape != (grid.n_nodes,):
            raise InvalidArgumentError(f"boolean mask must have {grid.n_nodes} entries")
        return arr
    idx = arr.astype(int).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= grid.n_nodes):
        raise InvalidArgumentError(f"mask indices must lie in [0, {grid.n_nodes})")
    return np.unique(idx)


def _mask_size(grid: CapGrid, selected: Optional[np.ndarray]) -> int:
    if selected is None:
        return grid.n_nodes
    if selected.dtype == bool:
        return int(np.count_nonzero(selected))
    return int(selected.size)


def capillary_area_measure(body: CapillaryBody, k: int, mask: Mask = None) -> float:
    """
    k-th capillary area measure C(n,k)^(-1) * integral over mask of ell sigma_k(r).

    Raises:
        InvalidArgumentError: k outside 0..n or bad mask indices
    """
    n = body.n
    if not 0 <= k <= n:
        raise InvalidArgumentError(f"k must lie in 0..{n}, got {k}")
    selected = _resolve_mask(body.grid, mask)
    integrand = ScalarField(body.grid, body.ell.values * body.sigma(k))
    return integrate(integrand, selected) / comb(n, k)


def quermassintegrals(body: CapillaryBody) -> List[float]:
    """S_k^c over the whole cap for k = 0..n."""
    return [capillary_area_measure(body, k) for k in range(body.n + 1)]


def minkowski_identity_check(h: FieldLike) -> List[float]:
    """
    Relative residuals of (n-l) int h sigma_l(W) = (l+1) int ell sigma_{l+1}(W), l = 0..n-1.
    """
    support = _support(h)
    grid = support.grid
    n = grid.n
    e = elementary_symmetric(build_W(support).eigenvalues())
    ell = ell_field(grid).values
    residuals = []
    for l in range(n):
        lhs = (n - l) * integrate(ScalarField(grid, support.values * e[:, l]))
        rhs = (l + 1) * integrate(ScalarField(grid, ell * e[:, l + 1]))
        denom = abs(lhs) + abs(rhs)
        residuals.append(abs(lhs - rhs) / denom if denom > 0 else 0.0)
    return residuals


def _volume_of(h: ScalarField) -> float:
    n = h.grid.n
    sigma_n = elementary_symmetric(build_W(h).eigenvalues())[:, n]
    return integrate(ScalarField(h.grid, h.values * sigma_n)) / (n + 1)


def steiner_polynomial(body: CapillaryBody, s: float) -> float:
    """(n+1)^(-1) * sum_k s^(n+1-k) C(n+1,k) S_k^c for the whole cap."""
    n = body.n
    measures = quermassintegrals(body)
    return sum(s ** (n + 1 - k) * comb(n + 1, k) * measures[k] for k in range(n + 1)) / (n + 1)


def steiner_volume_check(h: FieldLike, s_samples: Sequence[float] = STEINER_SAMPLES) -> float:
    """
    Max relative gap between the Steiner polynomial and the parallel-body volume.

    The parallel body at distance s has support function h + s ell.

    Raises:
        PreconditionViolationError: h is not strictly convex
        InvalidArgumentError: a negative s sample
    """
    support = _support(h)
    body = reconstruct_surface(support)
    if not body.strictly_convex:
        raise PreconditionViolationError("Steiner check needs a strictly convex support function")
    if any(s < 0 for s in s_samples):
        raise InvalidArgumentError("Steiner samples must be non-negative")
    base = body.volume()
    ell = ell_field(support.grid)
    worst = 0.0
    for s in s_samples:
        direct = _volume_of(support.h + s * ell) - base
        poly = steiner_polynomial(body, s)
        if direct == 0.0 and poly == 0.0:
            continue
        worst = max(worst, abs(direct - poly) / max(abs(direct), abs(poly)))
    return worst


def boundary_normals(body: CapillaryBody) -> np.ndarray:
    """
    Unit normals of the reconstructed surface on rho = theta, from its boundary tangents.

    The radial tangent is d/d rho of X extrapolated from the last four rings. Full
    mode crosses it with the central difference of the boundary ring; axisymmetric
    mode rotates it within the meridian plane. Normals point away from the axis.
    """
    grid = body.grid
    rings = body.vertices.reshape(grid.n_rho, grid.n_phi, grid.n + 1)[::-1][:4]
    d_rho = np.tensordot(_TANGENT_SLOPE_WEIGHTS, rings, axes=1) / grid.d_rho
    omega = node_directions(grid)[grid.boundary_nodes]
    if grid.mode is GridMode.FULL:
        coords = [ScalarField(grid, np.ascontiguousarray(body.vertices[:, a])) for a in range(grid.n + 1)]
        ring = np.stack([boundary_values(c) for c in coords], axis=-1)
        d_phi = (np.roll(ring, -1, axis=0) - np.roll(ring, 1, axis=0)) / (2.0 * grid.d_phi)
        nu = np.cross(d_rho, d_phi)
    else:
        radial = np.sum(d_rho[:, :-1] * omega, axis=-1)
        nu = np.concatenate([-d_rho[:, -1:] * omega, radial[:, None]], axis=-1)
    nu = nu / np.linalg.norm(nu, axis=-1, keepdims=True)
    outward = np.sign(np.sum(nu[:, :-1] * omega, axis=-1))
    return nu * np.where(outward == 0.0, 1.0, outward)[:, None]


def contact_angle_check(body: CapillaryBody) -> Tuple[float, float]:
    """
    Contact angle audit along the boundary.

    Returns:
        (max |<nu, e> - cos(pi - theta)|, max |X_{n+1}| on rho = theta) with nu
        the surface normal from boundary_normals
    """
    nu = boundary_normals(body)
    e = np.zeros(body.grid.n + 1)
    e[-1] = -1.0
    angle_defect = float(np.max(np.abs(nu @ e - np.cos(np.pi - body.theta))))
    height = float(np.max(np.abs(body.boundary_heights())))
    return angle_defect, height


def measure_report(body: CapillaryBody, ks: Optional[Sequence[int]] = None, mask: Mask = None,
                   s_samples: Sequence[float] = STEINER_SAMPLES) -> MeasureReport:
    """S_k^c over a mask plus the whole-cap identities of the body."""
    ks = list(range(body.n + 1)) if ks is None else list(ks)
    selected = _resolve_mask(body.grid, mask)
    measures = {k: capillary_area_measure(body, k, selected) for k in ks}
    steiner = None
    if body.strictly_convex:
        steiner = steiner_volume_check(body.support, s_samples)
    else:
        logger.info("Steiner check skipped: body is not strictly convex")
    return MeasureReport(
        measures=measures,
        mask_size=_mask_size(body.grid, selected),
        quermassintegrals=quermassintegrals(body),
        minkowski_residuals=minkowski_identity_check(body.support),
        steiner_samples=list(s_samples),
        steiner_residual=steiner,
        volume=body.volume(),
        surface_area=body.surface_area(),
    )


def export_mesh(body: CapillaryBody, path: Union[str, Path],
                vertex_path: Optional[Union[str, Path]] = None) -> Tuple[Path, Path]:
    """
    Write the body as a Wavefront OBJ plus a per-vertex CSV.

    Raises:
        UnsupportedModeError: axisymmetric bodies have no surface mesh
        ArtifactError: writing failed
    """
    from ..tools.mesh_export_tool import MeshExportTool

    if body.grid.mode is not GridMode.FULL:
        raise UnsupportedModeError("mesh export needs a full-mode grid")
    path = Path(path)
    vertex_path = Path(vertex_path) if vertex_path is not None else path.with_name("vertex_data.csv")
    tool = MeshExportTool()
    tool.run(body=body, obj_path=str(path), csv_path=str(vertex_path))
    return path, vertex_path
