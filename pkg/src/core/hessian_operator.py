"""
The sigma_k operator on support functions.

Assembles W = Hess h + h I, the nonlinear residual sigma_k(W) - f (or its
normalized form sigma_k(W)^(1/k) - f^(1/k)), the linearized operator with its
bordered kernel constraints, and the defect functionals monitored by the
solver.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..constants import CONE_EPS
from ..models.capillary_models import GridMode
from ..models.errors import EllipticityLostError, InvalidArgumentError, InvalidDataError
from .cap_geometry import (
    CapGrid,
    ScalarField,
    SymMatrixField,
    boundary_radial_derivative,
    boundary_values,
    check_on_grid,
    covariant_hessian,
    hessian_operators,
    integrate,
    kernel_fields,
    kernel_matrix,
)
from .symfunc import elementary_symmetric, sigma_k_gradient, sigma_k_matrix

logger = logging.getLogger(__name__)

THREADS_ENV = "CAPCMK_THREADS"
_MIN_CHUNK = 2048


class SupportField:
    """A candidate support function together with its Robin defect."""

    __slots__ = ("h", "robin_defect")

    def __init__(self, h: ScalarField, robin_defect: Optional[float] = None):
        self.h = h
        self.robin_defect = robin_defect if robin_defect is not None else robin_defect_of(h)

    @property
    def grid(self) -> CapGrid:
        return self.h.grid

    @property
    def values(self) -> np.ndarray:
        return self.h.values

    def __repr__(self) -> str:
        return f"SupportField({self.h!r}, robin_defect={self.robin_defect:.3e})"


FieldLike = Union[SupportField, ScalarField]


def as_scalar(h: FieldLike) -> ScalarField:
    return h.h if isinstance(h, SupportField) else h


def resolve_threads(requested: Optional[int] = None) -> int:
    """Worker count for node-parallel assembly, capped by CAPCMK_THREADS."""
    env = os.getenv(THREADS_ENV)
    cap = None
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={env!r}")
    if requested is None:
        return cap or 1
    return max(1, min(requested, cap) if cap else requested)


def _chunked(func, values: np.ndarray, threads: int) -> List:
    """Apply ``func`` to node chunks of ``values``, in parallel when threads > 1."""
    n_nodes = values.shape[0]
    if threads <= 1 or n_nodes < 2 * _MIN_CHUNK:
        return [func(values)]
    bounds = np.linspace(0, n_nodes, min(threads, n_nodes // _MIN_CHUNK) + 1).astype(int)
    chunks = [values[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, chunks))


def node_sigma_k(W: SymMatrixField, k: int, threads: int = 1) -> np.ndarray:
    """sigma_k(W) at every node."""
    parts = _chunked(lambda block: np.atleast_1d(sigma_k_matrix(block, k)), W.values, threads)
    return np.concatenate(parts)


def node_sigma_k_gradient(W: SymMatrixField, k: int, threads: int = 1) -> np.ndarray:
    """d sigma_k / d W_ab at every node, shape (N, n, n)."""
    parts = _chunked(lambda block: sigma_k_gradient(block, k), W.values, threads)
    return np.concatenate(parts)


def cone_margin(eigenvalues: np.ndarray, k: int) -> np.ndarray:
    """
    min over 1 <= i <= k of sigma_i(lam) / scale^i per node, scale = max |lam|.

    A node spectrum lies in Gamma_k iff its margin exceeds the cone tolerance
    (CONE_EPS unless SolverSettings.cone_eps overrides it).
    """
    e = elementary_symmetric(eigenvalues)
    scale = np.max(np.abs(eigenvalues), axis=-1)
    safe = np.where(scale > 0.0, scale, 1.0)
    ratios = np.stack([e[..., i] / safe ** i for i in range(1, k + 1)], axis=-1)
    margin = ratios.min(axis=-1)
    return np.where(scale > 0.0, margin, -np.inf)


def build_W(h: FieldLike, boundary: str = "robin") -> SymMatrixField:
    """
    W = Hess h + h I in the orthonormal frame.

    The boundary closure is the Robin ghost for support functions; pass
    ``boundary="free"`` for data that need not satisfy the Robin condition.
    """
    h = as_scalar(h)
    hess = covariant_hessian(h, boundary)
    values = np.array(hess.values)
    diag = np.arange(h.grid.n)
    values[:, diag, diag] += h.values[:, None]
    return SymMatrixField(h.grid, values)


def _check_order(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"order k must satisfy 1 <= k <= n={n}, got {k}")


def _check_target(f: ScalarField) -> None:
    if np.any(f.values <= 0.0):
        worst = int(np.argmin(f.values))
        raise InvalidDataError(f"f must be positive, f={f.values[worst]:.6g} at node {worst}",
                               node=worst)


def _signed_root(values: np.ndarray, k: int) -> np.ndarray:
    return np.sign(values) * np.abs(values) ** (1.0 / k)


def residual(h: FieldLike, f: ScalarField, k: int, normalized: bool = False,
             threads: int = 1) -> ScalarField:
    """
    Node-wise residual of sigma_k(W(h)) = f.

    Args:
        h: support function
        f: positive right-hand side on the same grid
        k: order, 1 <= k <= n
        normalized: return sigma_k^(1/k) - f^(1/k) instead of sigma_k - f
        threads: assembly workers

    Returns:
        ScalarField of residual values
    """
    h = as_scalar(h)
    check_on_grid(f, h.grid)
    _check_order(k, h.grid.n)
    _check_target(f)
    sigma = node_sigma_k(build_W(h), k, threads)
    if normalized:
        return ScalarField(h.grid, _signed_root(sigma, k) - f.values ** (1.0 / k))
    return ScalarField(h.grid, sigma - f.values)


def jacobian(h: FieldLike, k: int, normalized: bool = False, threads: int = 1,
             W: Optional[SymMatrixField] = None) -> sp.csr_matrix:
    """
    Sparse Jacobian of the residual, sum_ab sigma_k^{ab}(W) (H_ab + delta_ab I).

    Off-diagonal frame pairs enter twice since W is symmetric.
    """
    h = as_scalar(h)
    grid = h.grid
    _check_order(k, grid.n)
    if W is None:
        W = build_W(h)
    G = node_sigma_k_gradient(W, k, threads)
    eye = sp.identity(grid.n_nodes, format="csr")
    J = sp.csr_matrix((grid.n_nodes, grid.n_nodes))
    for (a, b), op in hessian_operators(grid, "robin").items():
        mult = 1.0 if a == b else 2.0
        block = op + eye if a == b else op
        J = J + sp.diags(mult * G[:, a, b]) @ block
    if normalized:
        sigma = node_sigma_k(W, k, threads)
        J = sp.diags(np.abs(sigma) ** (1.0 / k - 1.0) / k) @ J
    return J.tocsr()


@dataclass
class LinearSystem:
    """
    Bordered Newton system [[J, V], [V^T M, 0]] (delta, lam) = rhs.

    Rows 0..N-1 are PDE rows with the Robin closure folded into the
    stencils; the last ``n_multipliers`` rows constrain the update to be
    quadrature-orthogonal to the kernel fields.
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_nodes: int
    n_multipliers: int
    jacobian: sp.csr_matrix
    kernel: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def node_slice(self) -> slice:
        return slice(0, self.n_nodes)

    @property
    def multiplier_slice(self) -> slice:
        return slice(self.n_nodes, self.n_nodes + self.n_multipliers)

    def solve(self, rhs: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Direct sparse solve; returns (node update, kernel multipliers)."""
        b = self.rhs if rhs is None else rhs
        x = np.atleast_1d(spsolve(self.matrix.tocsc(), b))
        return x[self.node_slice], x[self.multiplier_slice]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Action of the PDE block on a node vector."""
        return self.jacobian @ v

    def weighted_asymmetry(self, v: np.ndarray, w: np.ndarray) -> float:
        """|<w, J v>_M - <v, J w>_M| / (|v|_M |w|_M)."""
        m = self.weights
        lhs = np.dot(m * w, self.jacobian @ v)
        rhs = np.dot(m * v, self.jacobian @ w)
        scale = np.sqrt(np.dot(m * v, v) * np.dot(m * w, w))
        return float(abs(lhs - rhs) / scale) if scale > 0 else 0.0


def assert_elliptic(W: SymMatrixField, k: int, eps: float = CONE_EPS) -> np.ndarray:
    """Raise EllipticityLostError unless every node spectrum lies in Gamma_k; returns the margins."""
    eig = W.eigenvalues()
    margin = cone_margin(eig, k)
    if not np.all(margin > eps):
        worst = int(np.argmin(margin))
        spectrum = [float(x) for x in eig[worst]]
        raise EllipticityLostError(
            f"spectrum of W left Gamma_{k} at node {worst}: {spectrum}",
            worst_node=worst, spectrum=spectrum)
    return margin


def linearize(h: FieldLike, k: int, target: Optional[ScalarField] = None,
              normalized: bool = False, threads: int = 1,
              cone_eps: float = CONE_EPS) -> LinearSystem:
    """
    Bordered linearization of the residual at h.

    Args:
        h: support function with W(h) in Gamma_k at every node
        k: order
        target: right-hand side; when given the rhs is (-residual, 0)
        normalized: linearize the normalized residual
        threads: assembly workers
        cone_eps: margin of the Gamma_k test on W(h)

    Returns:
        LinearSystem
    """
    h = as_scalar(h)
    grid = h.grid
    W = build_W(h)
    assert_elliptic(W, k, cone_eps)
    J = jacobian(h, k, normalized=normalized, threads=threads, W=W)
    V = kernel_matrix(grid)
    m = V.shape[1]
    if m:
        MV = grid.weights[:, None] * V
        matrix = sp.bmat([[J, sp.csr_matrix(V)],
                          [sp.csr_matrix(MV.T), None]], format="csr")
    else:
        matrix = J
    rhs = np.zeros(grid.n_nodes + m)
    if target is not None:
        rhs[:grid.n_nodes] = -residual(h, target, k, normalized=normalized, threads=threads).values
    logger.debug(f"Assembled bordered system of size {matrix.shape[0]} (nnz={matrix.nnz})")
    return LinearSystem(matrix=matrix, rhs=rhs, n_nodes=grid.n_nodes, n_multipliers=m,
                        jacobian=J, kernel=V, weights=np.asarray(grid.weights))


def orthogonality_defect(g: ScalarField) -> List[float]:
    """The n integrals of g against the kernel fields; zeros in axisymmetric mode."""
    grid = g.grid
    if grid.mode is not GridMode.FULL:
        return [0.0] * grid.n
    return [integrate(g * v) for v in kernel_fields(grid)]


def robin_defect_of(h: ScalarField) -> float:
    """max over the boundary of |d_rho h - cot(theta) h|, extrapolated to rho = theta."""
    theta = h.grid.theta
    slope = boundary_radial_derivative(h)
    value = boundary_values(h)
    return float(np.max(np.abs(slope - np.cos(theta) / np.sin(theta) * value)))


def robin_defect(h: FieldLike, theta: Optional[float] = None) -> float:
    """Robin defect of a field; ``theta`` must match the grid when given."""
    h = as_scalar(h)
    if theta is not None and not np.isclose(theta, h.grid.theta, rtol=0.0, atol=1e-14):
        raise InvalidArgumentError(f"theta={theta} does not match the grid theta={h.grid.theta}")
    return robin_defect_of(h)


def boundary_cross_term(W: SymMatrixField) -> float:
    """max |W_rho,phi| on the outermost ring; vanishes in the continuum limit."""
    if W.grid.mode is not GridMode.FULL:
        return 0.0
    ring = W.grid.boundary_nodes
    return float(np.max(np.abs(W.values[ring, 0, 1])))


def integral_identity(h: FieldLike, k: int, threads: int = 1) -> List[float]:
    """Integrals of v_alpha sigma_k(W(h)); zero in the continuum for Robin h."""
    h = as_scalar(h)
    fields = kernel_fields(h.grid)
    if not fields:
        return []
    sigma = ScalarField(h.grid, node_sigma_k(build_W(h), k, threads))
    return [integrate(sigma * v) for v in fields]


def robin_compatible_field(grid: CapGrid, rng: np.random.Generator, amplitude: float = 0.2,
                           modes: int = 3) -> ScalarField:
    """
    Random smooth field ell * (1 + g) with d_rho g = 0 at rho = theta.

    g is a combination of sin^m(rho) cos^2(pi rho / 2 theta) (a cos m phi + b sin m phi),
    which is smooth at the pole, so every sample satisfies the Robin condition.
    """
    rho = np.asarray(grid.rho_nodes)
    phi = np.asarray(grid.phi_nodes)
    bump = np.cos(np.pi * rho / (2.0 * grid.theta)) ** 2
    g = np.zeros(grid.n_nodes)
    top = modes if grid.mode is GridMode.FULL else 1
    for m in range(top):
        a, b = rng.uniform(-1.0, 1.0, size=2)
        angular = a * np.cos(m * phi) + b * np.sin(m * phi) if m else a
        g += np.sin(rho) ** m * bump * angular
    g *= amplitude / max(1.0, float(np.max(np.abs(g))))
    c = np.cos(grid.theta)
    return ScalarField(grid, (1.0 - c * np.cos(rho)) * (1.0 + g))
