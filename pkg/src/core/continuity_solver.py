"""
Continuity method for sigma_k(W(h)) = f on the spherical cap.

The solve starts from the explicit solution C(n,k)^(-1/k) ell of f = 1 and
follows the path q(t) = ((1 - t) + t f^(-1/k))^(-k) with damped Newton
corrections on the bordered system. Data hypotheses are validated up front;
failures of the convexity and boundary-monotonicity hypotheses only produce
warnings, since they are sufficient conditions for existence.
"""

import logging
import time
from math import comb
from typing import Iterable, List, Optional, Tuple

import numpy as np

from ..constants import CONE_EPS, PATH_SAMPLES
from ..models.capillary_models import (
    BoundMonitor,
    ConvexityCertificate,
    HomotopyStep,
    NewtonTrace,
    PathSample,
    ProblemSpec,
    SolveReport,
    SolverSettings,
    ValidationReport,
)
from ..models.errors import (
    ContinuationStuckError,
    EllipticityLostError,
    InconsistentDataError,
    InvalidDataError,
    NoConvergenceError,
)
from .cap_geometry import (
    ScalarField,
    boundary_radial_derivative,
    covariant_gradient,
    ell_field,
    kernel_matrix,
)
from .hessian_operator import (
    SupportField,
    FieldLike,
    as_scalar,
    assert_elliptic,
    boundary_cross_term,
    build_W,
    cone_margin,
    integral_identity,
    linearize,
    orthogonality_defect,
    resolve_threads,
    residual,
)
from .capillary_body import reconstruct_surface
from .symfunc import elementary_symmetric, gamma_cone_member

logger = logging.getLogger(__name__)

# Roundoff floor of the residual relative to eps * |J|_inf * |h|_inf
_ROUNDOFF_FACTOR = 16.0


# ---------------------------------------------------------------------------
# Normalization and data validation

def _kernel_projector(grid):
    V = kernel_matrix(grid)
    if V.shape[1] == 0:
        return None, None
    MV = grid.weights[:, None] * V
    gram = V.T @ MV
    return V, (MV, gram)


def normalize_translation(h: FieldLike) -> ScalarField:
    """
    Remove the horizontal translation part of h.

    Returns h - sum_alpha a_alpha v_alpha where the coefficients solve the
    quadrature Gram system of the kernel fields; identity in axisymmetric mode.
    """
    h = as_scalar(h)
    V, proj = _kernel_projector(h.grid)
    if V is None:
        return h
    MV, gram = proj
    coeffs = np.linalg.solve(gram, MV.T @ h.values)
    return ScalarField(h.grid, h.values - V @ coeffs)


def project_out_kernel(r: np.ndarray, grid) -> Tuple[np.ndarray, np.ndarray]:
    """Split r = r_perp + V c with r_perp quadrature-orthogonal to the kernel; returns (r_perp, c)."""
    V, proj = _kernel_projector(grid)
    if V is None:
        return r, np.zeros(0)
    MV, gram = proj
    coeffs = np.linalg.solve(gram, MV.T @ r)
    return r - V @ coeffs, coeffs


def validate_data(spec: ProblemSpec) -> ValidationReport:
    """
    Check the hypotheses on f before solving.

    Positivity and the orthogonality condition are hard errors; convexity of
    f^(-1/k) and boundary monotonicity of f are warnings.

    Raises:
        InvalidDataError: f is not positive (or degenerate relative to max f)
        InconsistentDataError: some integral of f against <xi, E_alpha> exceeds tolerance
    """
    f = spec.f
    k = spec.k
    settings = spec.settings
    grid = f.grid
    warnings: List[str] = []

    f_max = float(np.max(np.abs(f.values)))
    f_min = f.min()
    if f_min <= 0.0 or f_min < settings.degenerate_rel * f_max:
        worst = int(np.argmin(f.values))
        raise InvalidDataError(
            f"f must be positive: min f = {f_min:.6g} at node {worst}", node=worst)

    tolerance = settings.ortho_tol_rel * f_max * grid.area
    defect = orthogonality_defect(f)
    for alpha, value in enumerate(defect, start=1):
        if abs(value) > tolerance:
            raise InconsistentDataError(
                f"necessary condition violated: integral of f * <xi, E_{alpha}> = {value:.6g} "
                f"exceeds tolerance {tolerance:.3g}",
                alpha=alpha, defect=value, tolerance=tolerance)

    with np.errstate(over="raise", divide="raise"):
        try:
            g = f.map(lambda x: x ** (-1.0 / k))
        except FloatingPointError as exc:
            raise InvalidDataError(f"f^(-1/k) overflows: {exc}")
    eig = build_W(g, boundary="free").eigenvalues()
    convexity_min = float(eig.min())
    psd_tol = settings.boundary_tol_rel * float(np.max(np.abs(eig)))
    if convexity_min < -psd_tol:
        node = int(np.argmin(eig.min(axis=1)))
        warnings.append(
            f"f^(-1/k) is not convex: min eigenvalue of Hess + id is {convexity_min:.3e} at node {node}")

    boundary_min = float(boundary_radial_derivative(f).min())
    if boundary_min < -settings.boundary_tol_rel * f_max:
        warnings.append(f"boundary monotonicity fails: min d_mu f = {boundary_min:.3e}")

    if grid.domain.outside_theorem:
        warnings.append(f"theta = {grid.theta:.6g} > pi/2 is outside the existence theorem")

    for message in warnings:
        logger.warning(message)

    return ValidationReport(
        min_f=f_min,
        positive=True,
        ortho_defect=defect,
        ortho_tolerance=tolerance,
        convexity_min_eigenvalue=convexity_min,
        boundary_min_derivative=boundary_min,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Homotopy path

class HomotopyPath:
    """q(t) = ((1 - t) + t f^(-1/k))^(-k), with q(0) = 1 and q(1) = f exactly."""

    def __init__(self, f: ScalarField, k: int):
        self.f = f
        self.k = k
        with np.errstate(over="raise", divide="raise", invalid="raise"):
            try:
                g = f.values ** (-1.0 / k)
            except FloatingPointError as exc:
                raise InvalidDataError(f"f^(-1/k) cannot be evaluated: {exc}")
        if not np.all(np.isfinite(g)):
            raise InvalidDataError("f^(-1/k) is not finite")
        self._inverse_root = ScalarField(f.grid, g)

    def inverse_root(self, t: float) -> ScalarField:
        """q(t)^(-1/k), the convex combination (1 - t) + t f^(-1/k)."""
        return (1.0 - t) + t * self._inverse_root

    def __call__(self, t: float) -> ScalarField:
        if t <= 0.0:
            return ScalarField.constant(self.f.grid, 1.0)
        if t >= 1.0:
            return self.f
        return self.inverse_root(t).map(lambda x: x ** (-float(self.k)))

    def admissibility(self, ts: Iterable[float], tol_rel: float = 1e-3) -> List[PathSample]:
        """Convexity of q(t)^(-1/k) and sign of d_mu q(t) at each t."""
        samples = []
        for t in sorted(set(float(x) for x in ts)):
            eig = build_W(self.inverse_root(t), boundary="free").eigenvalues()
            min_eig = float(eig.min())
            q = self(t)
            slope = float(boundary_radial_derivative(q).min())
            admissible = (min_eig >= -tol_rel * float(np.max(np.abs(eig)))
                          and slope >= -tol_rel * q.norm_inf())
            samples.append(PathSample(t=t, min_eigenvalue=min_eig,
                                      min_boundary_derivative=slope, admissible=admissible))
        return samples


def default_path(f: ScalarField, k: int) -> HomotopyPath:
    return HomotopyPath(f, k)


# ---------------------------------------------------------------------------
# Newton

def _residual_vector(h: ScalarField, target: ScalarField, k: int, settings: SolverSettings,
                     threads: int) -> np.ndarray:
    return residual(h, target, k, normalized=settings.normalized_form, threads=threads).values


def _in_cone(h: ScalarField, k: int, eps: float = CONE_EPS) -> bool:
    margin = cone_margin(build_W(h).eigenvalues(), k)
    return bool(np.all(margin > eps))


def newton_solve(h0: FieldLike, target: ScalarField, k: int,
                 settings: Optional[SolverSettings] = None) -> Tuple[SupportField, NewtonTrace]:
    """
    Damped Newton iteration on the bordered system.

    Args:
        h0: initial support function with W(h0) in Gamma_k
        target: right-hand side f_t
        k: order
        settings: solver settings

    Returns:
        (converged support function, trace)

    Raises:
        EllipticityLostError: h0 is not elliptic, or every damped step leaves Gamma_k
        NoConvergenceError: iteration cap reached or no step decreases the residual
    """
    settings = settings or SolverSettings()
    threads = resolve_threads(settings.threads)
    grid = target.grid
    h = normalize_translation(h0)
    assert_elliptic(build_W(h), k, settings.cone_eps)

    scale = target.values ** (1.0 / k) if settings.normalized_form else target.values
    tol = settings.tol_newton_rel * float(np.max(np.abs(scale)))
    trace = NewtonTrace(tolerance=tol)

    r = _residual_vector(h, target, k, settings, threads)
    r_perp, _ = project_out_kernel(r, grid)
    norm = float(np.max(np.abs(r_perp)))
    trace.residual_norms.append(norm)
    best, best_norm = h, norm

    for iteration in range(settings.max_newton):
        system = linearize(h, k, normalized=settings.normalized_form, threads=threads,
                           cone_eps=settings.cone_eps)
        floor = _ROUNDOFF_FACTOR * np.finfo(float).eps * _inf_norm(system.jacobian) * h.norm_inf()
        if norm <= max(tol, floor):
            trace.converged = True
            break
        rhs = np.zeros(system.matrix.shape[0])
        rhs[:grid.n_nodes] = -r
        delta, multipliers = system.solve(rhs)
        trace.multipliers.append([float(x) for x in multipliers])

        step = 1.0
        accepted = False
        left_cone = True
        for halving in range(settings.max_halvings + 1):
            candidate = normalize_translation(ScalarField(grid, h.values + step * delta))
            if _in_cone(candidate, k, settings.cone_eps):
                left_cone = False
                r_c = _residual_vector(candidate, target, k, settings, threads)
                r_c_perp, _ = project_out_kernel(r_c, grid)
                norm_c = float(np.max(np.abs(r_c_perp)))
                if norm_c <= (1.0 - settings.armijo * step) * norm or norm_c <= max(tol, floor):
                    accepted = True
                    break
            logger.debug(f"Newton {iteration}: halving step to {step / 2:.3e}")
            step *= 0.5
        if not accepted:
            if left_cone:
                W = build_W(candidate)
                eig = W.eigenvalues()
                worst = int(np.argmin(cone_margin(eig, k)))
                raise EllipticityLostError(
                    f"every damped Newton step leaves Gamma_{k} (worst node {worst})",
                    worst_node=worst, spectrum=[float(x) for x in eig[worst]])
            if norm <= 64.0 * max(tol, floor):
                trace.converged = True
                trace.stalled = bool(norm > max(tol, floor))
                if trace.stalled:
                    logger.warning(f"Newton stalled at residual {norm:.3e} above tolerance "
                                   f"{tol:.3e}; accepting the iterate")
                break
            trace.final_residual = norm
            raise NoConvergenceError(
                f"no Armijo decrease from residual {norm:.3e} after {settings.max_halvings} halvings",
                best=SupportField(best), trace=trace)

        h, r, norm = candidate, r_c, norm_c
        trace.step_sizes.append(step)
        trace.halvings.append(halving)
        trace.residual_norms.append(norm)
        if norm < best_norm:
            best, best_norm = h, norm
        logger.debug(f"Newton {iteration}: residual {norm:.3e}, step {step:.3g}")
    else:
        system = linearize(h, k, normalized=settings.normalized_form, threads=threads,
                           cone_eps=settings.cone_eps)
        floor = _ROUNDOFF_FACTOR * np.finfo(float).eps * _inf_norm(system.jacobian) * h.norm_inf()
        if norm <= max(tol, floor):
            trace.converged = True
        else:
            trace.final_residual = norm
            raise NoConvergenceError(
                f"Newton did not converge in {settings.max_newton} iterations "
                f"(residual {norm:.3e}, tolerance {tol:.3e})",
                best=SupportField(best), trace=trace)

    trace.final_residual = norm
    return SupportField(h), trace


def _inf_norm(matrix) -> float:
    return float(np.max(np.abs(matrix).sum(axis=1)))


# ---------------------------------------------------------------------------
# Certificates and monitors

def convexity_certificate(h: FieldLike, k: int, eps_rel: float = 1e-8,
                          cone_eps: float = CONE_EPS) -> ConvexityCertificate:
    """
    Eigenvalue evidence for strict convexity.

    The flag is set only when the global minimum eigenvalue of W exceeds
    eps_rel * max eigenvalue and every node spectrum lies in Gamma_n.
    """
    h = as_scalar(h)
    n = h.grid.n
    eig = build_W(h).eigenvalues()
    node_min = eig[:, 0]
    node_max = eig[:, -1]
    global_max = float(np.max(np.abs(eig)))
    epsilon = eps_rel * global_max
    e = elementary_symmetric(eig)
    rank_monitor = {l: float(e[:, l + 1].min()) for l in range(k, n)}
    strictly = bool(node_min.min() > epsilon and np.all(gamma_cone_member(eig, n, cone_eps)))
    return ConvexityCertificate(
        node_min_eigenvalues=[float(x) for x in node_min],
        node_max_eigenvalues=[float(x) for x in node_max],
        global_min_eigenvalue=float(node_min.min()),
        global_max_eigenvalue=float(node_max.max()),
        worst_node=int(np.argmin(node_min)),
        rank_monitor=rank_monitor,
        epsilon=epsilon,
        strictly_convex=strictly,
    )


def bound_monitor(h: FieldLike) -> BoundMonitor:
    h = as_scalar(h)
    grad = covariant_gradient(h)
    eig = build_W(h).eigenvalues()
    return BoundMonitor(
        min_h=h.min(),
        max_h=h.max(),
        max_gradient=float(np.max(np.linalg.norm(grad, axis=1))),
        max_eigenvalue=float(eig.max()),
    )


# ---------------------------------------------------------------------------
# Solve

class ContinuitySolver:
    """Homotopy continuation from f = 1 to the target data."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.settings = spec.settings
        self.k = spec.k
        self.grid = spec.f.grid
        self.steps: List[HomotopyStep] = []
        self.newton_total = 0

    def starting_solution(self) -> ScalarField:
        n = self.grid.n
        return comb(n, self.k) ** (-1.0 / self.k) * ell_field(self.grid)

    def _attempt(self, h: ScalarField, t: float, step: float,
                 target: ScalarField) -> Optional[SupportField]:
        try:
            solution, trace = newton_solve(h, target, self.k, self.settings)
        except (NoConvergenceError, EllipticityLostError) as exc:
            trace = getattr(exc, "trace", None)
            iterations = trace.iterations if trace is not None else 0
            self.newton_total += iterations
            self.steps.append(HomotopyStep(
                t=t, step=step, accepted=False, newton_iterations=iterations,
                residual_norms=trace.residual_norms if trace is not None else [],
                reason=f"{exc.kind}: {exc.message}"))
            logger.info(f"Step to t={t:.4g} rejected ({exc.kind})")
            return None
        self.newton_total += trace.iterations
        reason = None
        if trace.stalled:
            reason = (f"accepted at residual {trace.final_residual:.3e} above tolerance "
                      f"{trace.tolerance:.3e}")
        self.steps.append(HomotopyStep(
            t=t, step=step, accepted=True, newton_iterations=trace.iterations,
            residual_norms=trace.residual_norms, reason=reason))
        logger.info(f"Reached t={t:.4g} in {trace.iterations} Newton iterations")
        return solution

    def run(self, path: HomotopyPath) -> Tuple[SupportField, float]:
        """Advance t from 0 to 1; returns the solution and the t reached."""
        s = self.settings
        h = self.starting_solution()
        t = 0.0
        if s.try_direct_step:
            solution = self._attempt(h, 1.0, 1.0, path(1.0))
            if solution is not None:
                return solution, 1.0
        step = s.initial_step
        solution = SupportField(h)
        while t < 1.0:
            t_next = min(1.0, t + step)
            candidate = self._attempt(solution.h, t_next, t_next - t, path(t_next))
            if candidate is None:
                step *= 0.5
                if step < s.step_floor:
                    raise ContinuationStuckError(
                        f"homotopy step fell below {s.step_floor:g} at t={t:.6g}",
                        t_reached=t, last_solution=solution)
                continue
            solution, t = candidate, t_next
            if self.steps[-1].newton_iterations <= s.fast_newton:
                step *= s.step_growth
        return solution, t

    @property
    def accepted_steps(self) -> List[HomotopyStep]:
        return [step for step in self.steps if step.accepted]


def solve(spec: ProblemSpec):
    """
    Solve sigma_k(W(h)) = f with the Robin condition by continuation.

    Args:
        spec: problem specification

    Returns:
        (SupportField, CapillaryBody, SolveReport)

    Raises:
        InvalidDataError, InconsistentDataError: from validate_data
        ContinuationStuckError: the homotopy step fell below its floor
    """
    started = time.perf_counter()
    validation = validate_data(spec)
    path = default_path(spec.f, spec.k)
    solver = ContinuitySolver(spec)
    logger.info(f"Solving sigma_{spec.k} problem on {spec.f.grid!r}")
    if spec.minkowski_mode:
        logger.info("k = n: Minkowski problem, the solution is unique up to translation")
    try:
        solution, t_reached = solver.run(path)
    except ContinuationStuckError as exc:
        exc.report = build_report(spec, exc.last_solution, solver, path, validation,
                                  t_reached=exc.t_reached, started=started)
        raise
    report = build_report(spec, solution, solver, path, validation, t_reached=t_reached,
                          started=started)
    body = reconstruct_surface(solution, f=spec.f, k=spec.k)
    return solution, body, report


def build_report(spec: ProblemSpec, solution: SupportField, solver: ContinuitySolver,
                 path: HomotopyPath, validation: Optional[ValidationReport],
                 t_reached: float, started: float) -> SolveReport:
    """Collect diagnostics for a (possibly partial) solve."""
    grid = spec.f.grid
    k = spec.k
    s = spec.settings
    threads = resolve_threads(s.threads)
    h = solution.h
    W = build_W(h)
    eig = W.eigenvalues()
    e = elementary_symmetric(eig)
    target = path(t_reached)
    raw = residual(h, target, k, threads=threads).values
    projected, multipliers = project_out_kernel(raw, grid)
    certificate = convexity_certificate(h, k, s.convexity_eps_rel, cone_eps=s.cone_eps)

    warnings = list(validation.warnings) if validation else []
    if solution.robin_defect > s.boundary_tol_rel * max(1.0, h.norm_inf()):
        warnings.append(f"robin defect {solution.robin_defect:.3e} above tolerance")
    if not certificate.strictly_convex:
        warnings.append(
            f"solution is not certified strictly convex: min eigenvalue "
            f"{certificate.global_min_eigenvalue:.3e} at node {certificate.worst_node}")

    for step in solver.accepted_steps:
        if step.reason:
            warnings.append(f"Newton at t={step.t:.4g} {step.reason}")

    ts = list(np.linspace(0.0, 1.0, PATH_SAMPLES)) + [st.t for st in solver.accepted_steps]
    path_samples = path.admissibility(ts, s.boundary_tol_rel)
    for sample in path_samples:
        if not sample.admissible:
            warnings.append(f"homotopy path not admissible at t={sample.t:.4g}")

    return SolveReport(
        n=grid.n,
        k=k,
        minkowski_mode=spec.minkowski_mode,
        theta=grid.theta,
        mode=grid.mode,
        n_rho=grid.n_rho,
        n_phi=grid.n_phi,
        homotopy_steps=len(solver.accepted_steps),
        newton_total=solver.newton_total,
        t_reached=t_reached,
        final_residual=float(np.max(np.abs(raw))),
        projected_residual=float(np.max(np.abs(projected))),
        min_eigenvalue_W=float(eig.min()),
        rank_profile=[float(e[:, j].min()) for j in range(1, grid.n + 1)],
        ortho_defect=orthogonality_defect(h),
        robin_defect=solution.robin_defect,
        kernel_multipliers=[-float(x) for x in multipliers],
        integral_identity=integral_identity(h, k, threads),
        boundary_cross_term=boundary_cross_term(W),
        bounds=bound_monitor(h),
        certificate=certificate,
        validation=validation,
        path=path_samples,
        steps=solver.steps,
        warnings=warnings,
        wall_time=time.perf_counter() - started,
    )
