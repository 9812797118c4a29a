"""
Elementary symmetric functions of eigenvalue vectors and symmetric matrices.

Every function accepts a single spectrum ``(n,)`` / matrix ``(n, n)`` or a
stack of them with arbitrary leading axes ``(..., n)`` / ``(..., n, n)`` and
is pure: inputs are never modified and results are fresh arrays (Python
floats / bools for unstacked input).
"""

import itertools
import logging
from math import comb
from typing import Tuple, Union

import numpy as np

from ..constants import CONE_EPS, EQUALITY_REL_GAP, MINOR_EXPANSION_MAX_N
from ..models.errors import InvalidArgumentError, PreconditionViolationError

logger = logging.getLogger(__name__)

ArrayOrFloat = Union[np.ndarray, float]
ArrayOrBool = Union[np.ndarray, bool]


def as_spectrum(values) -> np.ndarray:
    """Validate and copy a spectrum (or a stack of spectra)."""
    arr = np.array(values, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] < 1:
        raise InvalidArgumentError("spectrum must contain at least one value")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("spectrum entries must be finite")
    arr.setflags(write=False)
    return arr


def as_sym_matrix(entries) -> np.ndarray:
    """
    Build a symmetric matrix (or stack) from its upper triangle.

    The lower triangle of ``entries`` is ignored, so the result is exactly
    symmetric.
    """
    arr = np.array(entries, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
        raise InvalidArgumentError(f"expected square matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("matrix entries must be finite")
    upper = np.triu(arr)
    sym = upper + np.swapaxes(np.triu(arr, 1), -1, -2)
    sym.setflags(write=False)
    return sym


def _square(A) -> np.ndarray:
    arr = np.asarray(A, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise InvalidArgumentError(f"expected square matrices, got shape {arr.shape}")
    return arr


def _check_order(k: int) -> None:
    if k < 0:
        raise InvalidArgumentError(f"order k must be non-negative, got {k}")


def _unwrap(result: np.ndarray):
    if result.ndim == 0:
        return result.item()
    return result


def elementary_symmetric(lam) -> np.ndarray:
    """All of sigma_0..sigma_n of a spectrum stack, shape ``(..., n+1)``."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i][..., None]
        e[..., 1:i + 2] += x * e[..., 0:i + 1]
    return e


def sigma_k(lam, k: int) -> ArrayOrFloat:
    """
    k-th elementary symmetric polynomial of a spectrum.

    Args:
        lam: spectrum ``(n,)`` or stack ``(..., n)``
        k: order, k >= 0 (sigma_0 = 1 and sigma_k = 0 for k > n)

    Returns:
        sigma_k for every spectrum in the stack
    """
    _check_order(k)
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if k > n:
        return _unwrap(np.zeros(lam.shape[:-1]))
    return _unwrap(elementary_symmetric(lam)[..., k])


def sigma_k_deleted(lam, k: int) -> np.ndarray:
    """sigma_k(lam | i) for every i: the polynomial with lam_i removed, shape ``(..., n)``."""
    _check_order(k)
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    out = np.zeros(lam.shape)
    if k > n - 1:
        return out
    for i in range(n):
        reduced = np.delete(lam, i, axis=-1)
        if reduced.shape[-1] == 0:
            out[..., i] = 1.0 if k == 0 else 0.0
        else:
            out[..., i] = elementary_symmetric(reduced)[..., k]
    return out


def sigma_k_matrix(A, k: int) -> ArrayOrFloat:
    """
    sigma_k of a matrix: the sum of its k x k principal minors.

    Principal minors are used for n <= 4; larger matrices go through their
    eigenvalues.
    """
    _check_order(k)
    A = _square(A)
    n = A.shape[-1]
    lead = A.shape[:-2]
    if k == 0:
        return _unwrap(np.ones(lead))
    if k > n:
        return _unwrap(np.zeros(lead))
    if n <= MINOR_EXPANSION_MAX_N:
        total = np.zeros(lead)
        for subset in itertools.combinations(range(n), k):
            idx = list(subset)
            block = A[..., idx, :][..., :, idx]
            total = total + np.linalg.det(block)
        return _unwrap(total)
    if np.array_equal(A, np.swapaxes(A, -1, -2)):
        eig = np.linalg.eigvalsh(A)
    else:
        eig = np.linalg.eigvals(A).real
    return _unwrap(elementary_symmetric(eig)[..., k])


def _matrix_powers(A: np.ndarray, count: int) -> list:
    n = A.shape[-1]
    powers = [np.broadcast_to(np.eye(n), A.shape).copy()]
    for _ in range(1, count):
        powers.append(powers[-1] @ A)
    return powers


def sigma_k_gradient(A, k: int) -> np.ndarray:
    """
    First derivatives sigma_k^{ij} = d sigma_k / d A_ij.

    Uses the polynomial identity sum_r (-1)^r sigma_{k-1-r}(A) A^r, transposed,
    which for diagonal A reduces to diag(sigma_{k-1}(A | i)).
    """
    A = _square(A)
    n = A.shape[-1]
    if k < 1 or k > n:
        raise InvalidArgumentError(f"gradient needs 1 <= k <= n, got k={k}, n={n}")
    powers = _matrix_powers(A, k)
    P = np.zeros(A.shape)
    for r in range(k):
        coeff = ((-1) ** r) * np.asarray(sigma_k_matrix(A, k - 1 - r))
        P += coeff[..., None, None] * powers[r]
    return np.swapaxes(P, -1, -2)


def sigma_k_hessian(A, k: int) -> np.ndarray:
    """
    Second derivatives d^2 sigma_k / dA_ij dA_pq, shape ``(..., n, n, n, n)``.

    sigma_1 is linear and sigma_k vanishes for k > n, so both give zeros.
    """
    _check_order(k)
    A = _square(A)
    n = A.shape[-1]
    H = np.zeros(A.shape[:-2] + (n, n, n, n))
    if k < 2 or k > n:
        return H
    powers = _matrix_powers(A, k)
    for r in range(k):
        m = k - 1 - r
        sign = (-1) ** r
        if m >= 1:
            grad_m = sigma_k_gradient(A, m)
            H += sign * np.einsum('...pq,...ji->...ijpq', grad_m, powers[r])
        s_m = np.asarray(sigma_k_matrix(A, m))[..., None, None, None, None]
        for s in range(r):
            H += sign * s_m * np.einsum('...jp,...qi->...ijpq', powers[s], powers[r - 1 - s])
    return H


def sigma_k_root(A, k: int) -> ArrayOrFloat:
    """The normalized operator sigma_k(A)^(1/k); negative sigma_k maps to nan."""
    if k < 1:
        raise InvalidArgumentError(f"root needs k >= 1, got {k}")
    value = np.asarray(sigma_k_matrix(A, k))
    with np.errstate(invalid='ignore'):
        root = np.where(value >= 0.0, np.abs(value) ** (1.0 / k), np.nan)
    return _unwrap(root)


def gamma_cone_member(lam, k: int, eps: float = CONE_EPS) -> ArrayOrBool:
    """
    Garding cone test: sigma_i(lam) > 0 for 1 <= i <= k.

    Positivity is taken with the margin sigma_i > eps * scale**i where
    scale = max |lam_j|; the zero spectrum is never a member.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if k < 1 or k > n:
        raise InvalidArgumentError(f"cone test needs 1 <= k <= n, got k={k}, n={n}")
    e = elementary_symmetric(lam)
    scale = np.max(np.abs(lam), axis=-1)
    member = scale > 0.0
    for i in range(1, k + 1):
        member = member & (e[..., i] > eps * scale ** i)
    return _unwrap(np.asarray(member))


def _check_newton_maclaurin_orders(n: int, k: int, l: int, r: int, s: int) -> None:
    if not (k > l >= 0 and r > s >= 0 and k >= r and l >= s):
        raise InvalidArgumentError(
            f"Newton-Maclaurin needs k > l >= 0, r > s >= 0, k >= r, l >= s; got {(k, l, r, s)}"
        )
    if k > n:
        raise InvalidArgumentError(f"order k={k} exceeds dimension n={n}")


def newton_maclaurin_sides(lam, k: int, l: int, r: int, s: int) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Both sides of the generalized Newton-Maclaurin inequality.

    Returns:
        (lhs, rhs) with lhs = (sigma_k/C(n,k) / sigma_l/C(n,l))^(1/(k-l)) and
        rhs = (sigma_r/C(n,r) / sigma_s/C(n,s))^(1/(r-s))
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    _check_newton_maclaurin_orders(n, k, l, r, s)
    if not np.all(gamma_cone_member(lam, k)):
        raise PreconditionViolationError(f"spectrum is not in the Garding cone Gamma_{k}")
    e = elementary_symmetric(lam)

    def normalized(j: int) -> np.ndarray:
        return e[..., j] / comb(n, j)

    lhs = (normalized(k) / normalized(l)) ** (1.0 / (k - l))
    rhs = (normalized(r) / normalized(s)) ** (1.0 / (r - s))
    return _unwrap(np.asarray(lhs)), _unwrap(np.asarray(rhs))


def newton_maclaurin_check(lam, k: int, l: int, r: int, s: int,
                           rel_tol: float = 1e-10) -> ArrayOrBool:
    """True where lhs <= rhs up to a relative tolerance."""
    lhs, rhs = newton_maclaurin_sides(lam, k, l, r, s)
    holds = np.asarray(lhs) <= np.asarray(rhs) * (1.0 + rel_tol)
    return _unwrap(holds)


def newton_maclaurin_equality(lam, k: int, l: int, r: int, s: int) -> ArrayOrBool:
    """True where both sides agree to EQUALITY_REL_GAP (the constant-spectrum case)."""
    lhs, rhs = newton_maclaurin_sides(lam, k, l, r, s)
    gap = np.abs(np.asarray(rhs) - np.asarray(lhs))
    return _unwrap(gap <= EQUALITY_REL_GAP * np.abs(np.asarray(rhs)))
