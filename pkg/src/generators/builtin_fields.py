"""
Builtin right-hand sides for the sigma_k problem.

``constant`` and ``radial`` produce data directly. ``manufactured`` starts
from the rotationally symmetric support function
h* = ell * (1 + eps * p(rho)) and evaluates sigma_k(W(h*)) in closed form, so
grid refinement studies compare against a continuum truth. Both profiles p
have p'(0) = p'(theta) = 0, which keeps h* smooth at the pole and makes it
satisfy the Robin condition.
"""

import logging
from dataclasses import dataclass
from math import comb, pi
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..constants import BUILTIN_GENERATORS, MANUFACTURED_PROFILES
from ..core.cap_geometry import CapGrid, ScalarField
from ..models.errors import InvalidArgumentError, InvalidDataError

logger = logging.getLogger(__name__)

Profile = Callable[[np.ndarray, float], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def _cos2_profile(rho: np.ndarray, theta: float):
    a = pi / (2.0 * theta)
    p = np.cos(a * rho) ** 2
    dp = -a * np.sin(2.0 * a * rho)
    ddp = -2.0 * a * a * np.cos(2.0 * a * rho)
    return p, dp, ddp


def _quartic_profile(rho: np.ndarray, theta: float):
    u = rho / theta
    p = (1.0 - u * u) ** 2
    dp = -4.0 * u * (1.0 - u * u) / theta
    ddp = -4.0 * (1.0 - 3.0 * u * u) / theta ** 2
    return p, dp, ddp


PROFILES = {
    'cos2': _cos2_profile,
    'quartic': _quartic_profile,
}


@dataclass(frozen=True)
class ManufacturedCase:
    """A support function with its closed-form sigma_k image."""
    h: ScalarField
    f: ScalarField
    eps: float
    profile: str


def radial_support(grid: CapGrid, eps: float, profile: str = 'cos2'):
    """h*, h*' and h*'' of ell * (1 + eps * p) at every node."""
    if profile not in PROFILES:
        raise InvalidArgumentError(f"unknown profile {profile!r}, expected one of {MANUFACTURED_PROFILES}")
    rho = np.asarray(grid.rho_nodes)
    c = np.cos(grid.theta)
    ell, d_ell, dd_ell = 1.0 - c * np.cos(rho), c * np.sin(rho), c * np.cos(rho)
    p, dp, ddp = PROFILES[profile](rho, grid.theta)
    h = ell * (1.0 + eps * p)
    dh = d_ell * (1.0 + eps * p) + eps * ell * dp
    ddh = dd_ell * (1.0 + eps * p) + 2.0 * eps * d_ell * dp + eps * ell * ddp
    return h, dh, ddh


def radial_sigma_k(grid: CapGrid, k: int, h: np.ndarray, dh: np.ndarray, ddh: np.ndarray) -> np.ndarray:
    """
    sigma_k(W) for a rotationally symmetric support function.

    W = diag(h'' + h, cot(rho) h' + h, ...) with n - 1 equal angular entries.
    """
    n = grid.n
    rho = np.asarray(grid.rho_nodes)
    radial = ddh + h
    angular = np.cos(rho) / np.sin(rho) * dh + h
    return comb(n - 1, k - 1) * radial * angular ** (k - 1) + comb(n - 1, k) * angular ** k


def manufactured_case(grid: CapGrid, k: int, eps: float = 0.05, profile: str = 'cos2') -> ManufacturedCase:
    """Manufactured solution h* and its continuum data f* = sigma_k(W(h*))."""
    if not 1 <= k <= grid.n:
        raise InvalidArgumentError(f"order k must satisfy 1 <= k <= n={grid.n}, got {k}")
    h, dh, ddh = radial_support(grid, eps, profile)
    f = radial_sigma_k(grid, k, h, dh, ddh)
    if np.any(f <= 0.0):
        raise InvalidDataError(f"eps={eps} gives non-positive data for profile {profile!r}")
    return ManufacturedCase(h=ScalarField(grid, h), f=ScalarField(grid, f), eps=eps, profile=profile)


def radial_field(grid: CapGrid, coefficients: List[float]) -> ScalarField:
    """f = sum_j coefficients[j] * cos(rho)^j."""
    if not coefficients:
        raise InvalidArgumentError("radial generator needs at least one coefficient")
    values = np.polynomial.polynomial.polyval(np.cos(grid.rho_nodes), coefficients)
    return ScalarField(grid, values)


def create_builtin_field(name: str, grid: CapGrid, k: int, value: Optional[float] = None,
                         eps: float = 0.05, profile: str = 'cos2',
                         coefficients: Optional[List[float]] = None
                         ) -> Tuple[ScalarField, Optional[ScalarField]]:
    """
    Factory for builtin data.

    Args:
        name: one of BUILTIN_GENERATORS
        grid: grid to sample on
        k: order of the problem
        value: constant value (defaults to C(n,k), whose solution is ell)
        eps: manufactured bump amplitude
        profile: manufactured bump profile
        coefficients: radial polynomial coefficients in cos(rho)

    Returns:
        (f, exact solution or None)
    """
    if name == 'constant':
        c = float(comb(grid.n, k) if value is None else value)
        return ScalarField.constant(grid, c), None
    if name == 'manufactured':
        case = manufactured_case(grid, k, eps, profile)
        logger.info(f"Manufactured data: eps={eps}, profile={profile}, f in [{case.f.min():.4g}, {case.f.max():.4g}]")
        return case.f, case.h
    if name == 'radial':
        return radial_field(grid, list(coefficients or [])), None
    raise InvalidArgumentError(f"unknown builtin generator {name!r}, expected one of {BUILTIN_GENERATORS}")
