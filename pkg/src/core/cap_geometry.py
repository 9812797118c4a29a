"""
Spherical cap geometry: grids, quadrature, embedding and frame derivatives.

The cap C_theta is parametrized by geodesic polar coordinates (rho, omega)
about its pole, with metric d rho^2 + sin^2 rho g_{S^{n-1}}. Nodes are
staggered in rho, rho_i = (i + 1/2) * theta / n_rho, so the pole is never a
node and the last cell face sits on the boundary rho = theta.

Difference stencils are three-point formulas fitted to be exact on
{1, cos, sin}; the support function ell of the cap and the kernel fields
sin(rho) * omega_alpha are therefore differentiated without truncation error.
Stencils that cross the pole use the antipodal continuation
h(-rho, phi) = h(rho, phi + pi). Stencils that cross the boundary use a ghost
value at theta + d_rho/2, either the Robin ghost (support functions) or a
cubic extrapolation (free data such as f^(-1/k)).
"""

import logging
from functools import lru_cache
from math import gamma, pi
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..constants import MIN_N_PHI, MIN_N_RHO
from ..models.capillary_models import CapDomain, GridMode
from ..models.errors import InvalidArgumentError, InvalidDataError, UnsupportedModeError
from .symfunc import as_sym_matrix, sigma_k_matrix

logger = logging.getLogger(__name__)

BOUNDARY_MODES = ("robin", "free")

# One-sided extrapolation to rho = theta from the last three rings
# (offsets -1/2, -3/2, -5/2 in units of d_rho).
BOUNDARY_VALUE_WEIGHTS = np.array([15.0 / 8.0, -5.0 / 4.0, 3.0 / 8.0])
BOUNDARY_SLOPE_WEIGHTS = np.array([2.0, -3.0, 1.0])

_GAUSS_POINTS = 8


def sphere_measure(dim: int) -> float:
    """Hausdorff measure of the unit sphere S^dim (S^0 counts two points)."""
    return 2.0 * pi ** ((dim + 1) / 2.0) / gamma((dim + 1) / 2.0)


class CapGrid:
    """
    Immutable staggered grid on C_theta.

    Node (i, j) has index ``i * n_phi + j``; in axisymmetric mode n_phi is 1
    and every node stands for a whole (n-1)-sphere of radius sin(rho_i).
    """

    def __init__(self, domain: CapDomain, n_rho: int, n_phi: int, mode: GridMode):
        self.domain = domain
        self.mode = mode
        self.n_rho = n_rho
        self.n_phi = n_phi
        self.d_rho = domain.theta / n_rho
        self.d_phi = 2.0 * pi / n_phi if mode is GridMode.FULL else 0.0

        self.rho = (np.arange(n_rho) + 0.5) * self.d_rho
        self.phi = np.arange(n_phi) * self.d_phi
        self.rho_nodes = np.repeat(self.rho, n_phi)
        self.phi_nodes = np.tile(self.phi, n_rho)

        angular = self.d_phi if mode is GridMode.FULL else sphere_measure(domain.n - 1)
        self.weights = np.repeat(self._cell_measures() * angular, n_phi)
        self.boundary_weights = np.full(n_phi, np.sin(domain.theta) ** (domain.n - 1) * angular)

        for arr in (self.rho, self.phi, self.rho_nodes, self.phi_nodes,
                    self.weights, self.boundary_weights):
            arr.setflags(write=False)

    def _cell_measures(self) -> np.ndarray:
        # Exact round-metric measure of each radial cell, Gauss-Legendre per cell
        x, w = np.polynomial.legendre.leggauss(_GAUSS_POINTS)
        lo = np.arange(self.n_rho) * self.d_rho
        pts = lo[:, None] + 0.5 * self.d_rho * (x[None, :] + 1.0)
        density = np.sin(pts) ** (self.domain.n - 1)
        return 0.5 * self.d_rho * density @ w

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def theta(self) -> float:
        return self.domain.theta

    @property
    def n_nodes(self) -> int:
        return self.n_rho * self.n_phi

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_rho, self.n_phi)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    @property
    def boundary_nodes(self) -> np.ndarray:
        """Node indices of the outermost ring."""
        start = (self.n_rho - 1) * self.n_phi
        return np.arange(start, start + self.n_phi)

    def node_index(self, i: int, j: int = 0) -> int:
        return i * self.n_phi + j

    def signature(self) -> Tuple:
        return (self.domain.n, self.domain.theta, self.n_rho, self.n_phi, self.mode.value)

    def same_as(self, other: "CapGrid") -> bool:
        return self is other or self.signature() == other.signature()

    def __eq__(self, other) -> bool:
        return isinstance(other, CapGrid) and self.same_as(other)

    def __hash__(self) -> int:
        return hash(self.signature())

    def __repr__(self) -> str:
        return (f"CapGrid(n={self.n}, theta={self.theta:.6g}, n_rho={self.n_rho}, "
                f"n_phi={self.n_phi}, mode={self.mode.value})")


def build_grid(domain: CapDomain, n_rho: int, n_phi: int = 1,
               mode: GridMode = GridMode.FULL) -> CapGrid:
    """
    Build the staggered grid for a cap.

    Args:
        domain: cap dimension and contact angle
        n_rho: number of radial nodes (>= 4)
        n_phi: number of angular nodes, even and >= 8 in full mode; ignored
            in axisymmetric mode
        mode: full (n = 2 only) or axisymmetric

    Returns:
        CapGrid
    """
    mode = GridMode(mode)
    if n_rho < MIN_N_RHO:
        raise InvalidArgumentError(f"n_rho must be >= {MIN_N_RHO}, got {n_rho}")
    if mode is GridMode.FULL:
        if domain.n != 2:
            raise UnsupportedModeError(
                f"full mode needs n = 2, got n = {domain.n}; use axisymmetric mode")
        if n_phi < MIN_N_PHI or n_phi % 2:
            raise InvalidArgumentError(f"n_phi must be even and >= {MIN_N_PHI}, got {n_phi}")
    else:
        n_phi = 1
    if domain.outside_theorem:
        logger.warning(f"theta={domain.theta:.6g} > pi/2: outside the existence theorem, no guarantees")
    grid = CapGrid(domain, n_rho, n_phi, mode)
    logger.debug(f"Built {grid!r}")
    return grid


class ScalarField:
    """One finite value per grid node."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: CapGrid, values):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != grid.n_nodes:
            raise InvalidArgumentError(
                f"field has {arr.size} values, grid {grid!r} has {grid.n_nodes} nodes")
        if not np.all(np.isfinite(arr)):
            raise InvalidDataError("field values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @classmethod
    def from_function(cls, grid: CapGrid, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        """Sample ``func(rho, phi)`` at every node."""
        return cls(grid, np.broadcast_to(func(grid.rho_nodes, grid.phi_nodes), (grid.n_nodes,)))

    @classmethod
    def constant(cls, grid: CapGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def as_array(self) -> np.ndarray:
        """Values shaped (n_rho, n_phi)."""
        return self.values.reshape(self.grid.shape)

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        return ScalarField(self.grid, func(self.values))

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _operand(self, other):
        if isinstance(other, ScalarField):
            if not self.grid.same_as(other.grid):
                raise InvalidArgumentError("fields live on different grids")
            return other.values
        return float(other)

    def __add__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values - self._operand(other))

    def __rsub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self._operand(other) - self.values)

    def __mul__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values / self._operand(other))

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"ScalarField({self.grid!r}, min={self.min():.6g}, max={self.max():.6g})"


class SymMatrixField:
    """A symmetric n x n matrix per node, in the orthonormal frame {e_rho, e_phi, ...}."""

    __slots__ = ("grid", "values", "_eigenvalues")

    def __init__(self, grid: CapGrid, values):
        arr = as_sym_matrix(values)
        if arr.shape != (grid.n_nodes, grid.n, grid.n):
            raise InvalidArgumentError(
                f"expected shape {(grid.n_nodes, grid.n, grid.n)}, got {arr.shape}")
        self.grid = grid
        self.values = arr
        self._eigenvalues: Optional[np.ndarray] = None

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues per node, shape (N, n)."""
        if self._eigenvalues is None:
            eig = np.linalg.eigvalsh(self.values)
            eig.setflags(write=False)
            self._eigenvalues = eig
        return self._eigenvalues

    def component(self, a: int, b: int) -> ScalarField:
        return ScalarField(self.grid, self.values[:, a, b])

    def sigma_k(self, k: int) -> ScalarField:
        return ScalarField(self.grid, sigma_k_matrix(self.values, k))


def check_on_grid(field: ScalarField, grid: CapGrid) -> None:
    if not field.grid.same_as(grid):
        raise InvalidArgumentError("field does not live on this grid")


# ---------------------------------------------------------------------------
# Embedding and closed-form fields

def embed(rho, omega, theta: float) -> np.ndarray:
    """
    Point of C_theta in R^{n+1} for polar coordinates (rho, omega).

    Args:
        rho: geodesic distance from the pole, scalar or array (...)
        omega: unit direction in R^n, shape (n,) or (..., n)
        theta: contact angle

    Returns:
        xi = (sin(rho) * omega, cos(rho) - cos(theta)), shape (..., n+1)
    """
    rho = np.asarray(rho, dtype=float)
    omega = np.asarray(omega, dtype=float)
    horizontal = np.sin(rho)[..., None] * omega
    vertical = np.broadcast_to((np.cos(rho) - np.cos(theta))[..., None],
                               horizontal.shape[:-1] + (1,))
    return np.concatenate([horizontal, vertical], axis=-1)


def node_directions(grid: CapGrid) -> np.ndarray:
    """omega in S^{n-1} per node; axisymmetric nodes use the representative E_1."""
    if grid.mode is GridMode.FULL:
        return np.stack([np.cos(grid.phi_nodes), np.sin(grid.phi_nodes)], axis=-1)
    omega = np.zeros((grid.n_nodes, grid.n))
    omega[:, 0] = 1.0
    return omega


def embed_nodes(grid: CapGrid) -> np.ndarray:
    """Embedded node positions, shape (N, n+1)."""
    return embed(grid.rho_nodes, node_directions(grid), grid.theta)


def unit_normals(grid: CapGrid) -> np.ndarray:
    """N(xi) = xi - cos(theta) e = (sin(rho) omega, cos(rho)), the unit normal of the sphere."""
    omega = node_directions(grid)
    return np.concatenate([np.sin(grid.rho_nodes)[:, None] * omega,
                           np.cos(grid.rho_nodes)[:, None]], axis=-1)


def tangent_frame(grid: CapGrid) -> List[np.ndarray]:
    """
    Orthonormal tangent frame pushed into R^{n+1}.

    Returns [e_rho, e_2, ..., e_n], each of shape (N, n+1). In full mode
    e_2 = e_phi_hat = (-sin(phi), cos(phi), 0).
    """
    omega = node_directions(grid)
    e_rho = np.concatenate([np.cos(grid.rho_nodes)[:, None] * omega,
                            -np.sin(grid.rho_nodes)[:, None]], axis=-1)
    frame = [e_rho]
    if grid.mode is GridMode.FULL:
        zeros = np.zeros(grid.n_nodes)
        frame.append(np.stack([-np.sin(grid.phi_nodes), np.cos(grid.phi_nodes), zeros], axis=-1))
    else:
        for a in range(1, grid.n):
            e_a = np.zeros((grid.n_nodes, grid.n + 1))
            e_a[:, a] = 1.0
            frame.append(e_a)
    return frame


def ell_field(grid: CapGrid) -> ScalarField:
    """The support function of C_theta itself, ell = 1 - cos(theta) cos(rho)."""
    return ScalarField(grid, 1.0 - np.cos(grid.theta) * np.cos(grid.rho_nodes))


def kernel_fields(grid: CapGrid) -> List[ScalarField]:
    """
    Horizontal coordinates <xi, E_alpha> = sin(rho) omega_alpha.

    These span the kernel of the linearized operator (translations). In
    axisymmetric mode they are excluded by symmetry and the list is empty.
    """
    if grid.mode is not GridMode.FULL:
        return []
    s = np.sin(grid.rho_nodes)
    return [ScalarField(grid, s * np.cos(grid.phi_nodes)),
            ScalarField(grid, s * np.sin(grid.phi_nodes))]


def kernel_matrix(grid: CapGrid) -> np.ndarray:
    """Kernel fields as columns, shape (N, n_kernel)."""
    fields = kernel_fields(grid)
    if not fields:
        return np.zeros((grid.n_nodes, 0))
    return np.stack([v.values for v in fields], axis=1)


# ---------------------------------------------------------------------------
# Quadrature

def integrate(field: ScalarField, mask: Optional[np.ndarray] = None,
              grid: Optional[CapGrid] = None) -> float:
    """
    Round-metric integral of a field.

    Args:
        field: integrand
        mask: optional node indices or boolean node mask restricting the domain
        grid: optional grid the field is expected to live on

    Returns:
        Quadrature sum with the stored cell weights
    """
    if grid is not None:
        check_on_grid(field, grid)
    weights = field.grid.weights
    if mask is None:
        return float(np.dot(weights, field.values))
    return float(np.dot(weights[mask], field.values[mask]))


def boundary_values(field: ScalarField) -> np.ndarray:
    """Values extrapolated to rho = theta, one per boundary node."""
    rings = _last_rings(field, 3)
    return BOUNDARY_VALUE_WEIGHTS @ rings


def boundary_radial_derivative(field: ScalarField) -> np.ndarray:
    """d/d rho extrapolated to rho = theta, i.e. the derivative along the outward co-normal."""
    rings = _last_rings(field, 3)
    return BOUNDARY_SLOPE_WEIGHTS @ rings / field.grid.d_rho


def _last_rings(field: ScalarField, count: int) -> np.ndarray:
    grid = field.grid
    arr = field.as_array()
    return np.stack([arr[grid.n_rho - 1 - m] for m in range(count)])


def integrate_boundary(field: ScalarField, grid: Optional[CapGrid] = None) -> float:
    """Integral over the boundary (n-1)-sphere of radius sin(theta)."""
    if grid is not None:
        check_on_grid(field, grid)
    return float(np.dot(field.grid.boundary_weights, boundary_values(field)))


# ---------------------------------------------------------------------------
# Difference operators

def robin_ghost_weights(theta: float, d_rho: float) -> np.ndarray:
    """
    Ghost value at theta + d_rho/2 as a combination of the last three rings.

    The weights reproduce ell, sin(rho) and ((rho - theta)/d_rho)^3 exactly;
    every function in that span satisfies d_rho h = cot(theta) h at rho = theta
    to third order.
    """
    offsets = np.array([-0.5, -1.5, -2.5]) * d_rho

    def basis(x: np.ndarray) -> np.ndarray:
        return np.stack([1.0 - np.cos(theta) * np.cos(theta + x),
                         np.sin(theta + x),
                         (x / d_rho) ** 3])

    M = basis(offsets)
    target = basis(np.array([0.5 * d_rho]))[:, 0]
    return np.linalg.solve(M, target)


def free_ghost_weights() -> np.ndarray:
    """Cubic extrapolation from the last four rings."""
    return np.array([4.0, -6.0, 4.0, -1.0])


def _extension_matrix(grid: CapGrid, boundary: str) -> sp.csr_matrix:
    """Map node values to rings -1..n_rho, adding pole and ghost rings."""
    n_rho, n_phi = grid.shape
    rows, cols, vals = [], [], []
    half = n_phi // 2
    for j in range(n_phi):
        rows.append(j)
        cols.append((j + half) % n_phi)
        vals.append(1.0)
    for i in range(n_rho):
        for j in range(n_phi):
            rows.append((i + 1) * n_phi + j)
            cols.append(i * n_phi + j)
            vals.append(1.0)
    if boundary == "robin":
        ghost = robin_ghost_weights(grid.theta, grid.d_rho)
    elif boundary == "free":
        if n_rho < 4:
            raise InvalidArgumentError("free boundary closure needs n_rho >= 4")
        ghost = free_ghost_weights()
    else:
        raise InvalidArgumentError(f"unknown boundary mode {boundary!r}, expected one of {BOUNDARY_MODES}")
    for m, weight in enumerate(ghost):
        for j in range(n_phi):
            rows.append((n_rho + 1) * n_phi + j)
            cols.append((n_rho - 1 - m) * n_phi + j)
            vals.append(weight)
    return sp.csr_matrix((vals, (rows, cols)), shape=((n_rho + 2) * n_phi, grid.n_nodes))


def _ring_selector(grid: CapGrid, shift: int) -> sp.csr_matrix:
    """Pick extended ring i + 1 + shift for every node of ring i."""
    n_rho, n_phi = grid.shape
    rows = np.arange(grid.n_nodes)
    cols = rows + (1 + shift) * n_phi
    return sp.csr_matrix((np.ones(grid.n_nodes), (rows, cols)), shape=(grid.n_nodes, (n_rho + 2) * n_phi))


def _periodic_stencils(n_phi: int, d_phi: float) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    eye = sp.identity(n_phi, format="csr")
    up = sp.csr_matrix(np.roll(np.eye(n_phi), 1, axis=1))
    down = up.T.tocsr()
    first = (up - down) / (2.0 * np.sin(d_phi))
    second = (up - 2.0 * eye + down) / (4.0 * np.sin(0.5 * d_phi) ** 2)
    return first.tocsr(), second.tocsr()


class DifferenceOperators:
    """Sparse first and second derivatives in (rho, phi) for one grid and boundary closure."""

    def __init__(self, grid: CapGrid, boundary: str = "robin"):
        self.grid = grid
        self.boundary = boundary
        ext = _extension_matrix(grid, boundary)
        plus = _ring_selector(grid, 1)
        centre = _ring_selector(grid, 0)
        minus = _ring_selector(grid, -1)
        d = grid.d_rho
        self.d_rho = ((plus - minus) @ ext / (2.0 * np.sin(d))).tocsr()
        self.d_rho_rho = ((plus - 2.0 * centre + minus) @ ext / (4.0 * np.sin(0.5 * d) ** 2)).tocsr()

        self.d_phi: Optional[sp.csr_matrix] = None
        self.d_phi_phi: Optional[sp.csr_matrix] = None
        self.d_rho_phi: Optional[sp.csr_matrix] = None
        if grid.mode is GridMode.FULL:
            first, second = _periodic_stencils(grid.n_phi, grid.d_phi)
            ring_eye = sp.identity(grid.n_rho, format="csr")
            self.d_phi = sp.kron(ring_eye, first, format="csr")
            self.d_phi_phi = sp.kron(ring_eye, second, format="csr")
            self.d_rho_phi = (self.d_rho @ self.d_phi).tocsr()


@lru_cache(maxsize=32)
def difference_operators(grid: CapGrid, boundary: str = "robin") -> DifferenceOperators:
    return DifferenceOperators(grid, boundary)


@lru_cache(maxsize=32)
def hessian_operators(grid: CapGrid, boundary: str = "robin") -> Dict[Tuple[int, int], sp.csr_matrix]:
    """
    Sparse operators H_ab with (Hess h)_ab = H_ab @ h in the orthonormal frame.

    Only a <= b is stored; in axisymmetric mode the off-diagonal entries
    vanish and every angular diagonal entry shares one operator.
    """
    ops = difference_operators(grid, boundary)
    rho = grid.rho_nodes
    cot = sp.diags(np.cos(rho) / np.sin(rho))
    blocks: Dict[Tuple[int, int], sp.csr_matrix] = {(0, 0): ops.d_rho_rho}
    if grid.mode is GridMode.FULL:
        inv_sin = sp.diags(1.0 / np.sin(rho))
        blocks[(0, 1)] = (inv_sin @ (ops.d_rho_phi - cot @ ops.d_phi)).tocsr()
        blocks[(1, 1)] = (inv_sin @ inv_sin @ ops.d_phi_phi + cot @ ops.d_rho).tocsr()
    else:
        angular = (cot @ ops.d_rho).tocsr()
        for a in range(1, grid.n):
            blocks[(a, a)] = angular
    return blocks


def covariant_gradient(h: ScalarField, boundary: str = "robin") -> np.ndarray:
    """Frame components of grad h per node, shape (N, n)."""
    grid = h.grid
    ops = difference_operators(grid, boundary)
    grad = np.zeros((grid.n_nodes, grid.n))
    grad[:, 0] = ops.d_rho @ h.values
    if grid.mode is GridMode.FULL:
        grad[:, 1] = (ops.d_phi @ h.values) / np.sin(grid.rho_nodes)
    return grad


def covariant_hessian(h: ScalarField, boundary: str = "robin") -> SymMatrixField:
    """
    Frame components of the round-metric Hessian.

    Full mode: H_rr = h_rr, H_rp = (h_rp - cot(rho) h_p)/sin(rho),
    H_pp = h_pp/sin^2(rho) + cot(rho) h_r. Axisymmetric mode:
    diag(h'', cot(rho) h', ..., cot(rho) h').
    """
    grid = h.grid
    if grid.n_rho < MIN_N_RHO:
        raise InvalidArgumentError(f"grid too coarse for the stencil: n_rho={grid.n_rho}")
    values = np.zeros((grid.n_nodes, grid.n, grid.n))
    for (a, b), op in hessian_operators(grid, boundary).items():
        comp = op @ h.values
        values[:, a, b] = comp
        values[:, b, a] = comp
    return SymMatrixField(grid, values)
