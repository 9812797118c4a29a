from datetime import datetime
from enum import Enum
from math import pi
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


class GridMode(str, Enum):
    """Discretization mode of the spherical cap."""
    FULL = "full"                  # tensor grid in (rho, phi), n = 2 only
    AXISYMMETRIC = "axisymmetric"  # grid in rho only, any n


class CapDomain(BaseModel):
    """The spherical cap C_theta of dimension n."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, description="Dimension of the cap (hypersurface dimension)")
    theta: float = Field(gt=0.0, lt=pi, description="Contact angle in radians")

    @computed_field
    @property
    def outside_theorem(self) -> bool:
        """True for theta > pi/2, where existence is only conjectured."""
        return self.theta > pi / 2


class SolverSettings(BaseModel):
    """Newton, homotopy and verification tolerances."""
    model_config = ConfigDict(extra="forbid")

    tol_newton_rel: float = Field(default=1e-10, gt=0.0)
    max_newton: int = Field(default=25, ge=1)
    max_halvings: int = Field(default=30, ge=0)
    armijo: float = Field(default=1e-4, ge=0.0, lt=1.0)
    initial_step: float = Field(default=0.1, gt=0.0, le=1.0)
    step_growth: float = Field(default=1.5, ge=1.0)
    fast_newton: int = Field(default=3, ge=1)  # iterations counted as a fast success
    step_floor: float = Field(default=1e-4, gt=0.0)
    normalized_form: bool = True  # iterate on sigma_k^(1/k) = f^(1/k)
    try_direct_step: bool = True
    ortho_tol_rel: float = Field(default=1e-8, gt=0.0)
    convexity_eps_rel: float = Field(default=1e-8, gt=0.0)
    boundary_tol_rel: float = Field(default=1e-3, gt=0.0)
    verify_residual_rel: float = Field(default=1e-6, gt=0.0)
    verify_minkowski: float = Field(default=1e-3, gt=0.0)
    verify_steiner: float = Field(default=1e-4, gt=0.0)
    verify_symmetry: float = Field(default=5e-2, gt=0.0)
    cone_eps: float = Field(default=1e-10, gt=0.0)
    degenerate_rel: float = Field(default=1e-12, gt=0.0)
    threads: int = Field(default=1, ge=1)


class ProblemSpec(BaseModel):
    """Full input of a solve: domain, order k, data f and settings."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    domain: CapDomain
    k: int = Field(ge=1)
    f: Any  # ScalarField on a grid of this domain
    settings: SolverSettings = Field(default_factory=SolverSettings)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ProblemSpec":
        if self.k > self.domain.n:
            raise ValueError(f"k={self.k} exceeds n={self.domain.n}")
        grid = getattr(self.f, "grid", None)
        if grid is None or grid.domain != self.domain:
            raise ValueError("f must live on a grid of the problem domain")
        return self

    @property
    def minkowski_mode(self) -> bool:
        return self.k == self.domain.n


class NewtonTrace(BaseModel):
    """Per-iteration record of one Newton solve."""
    residual_norms: List[float] = Field(default_factory=list)
    step_sizes: List[float] = Field(default_factory=list)
    halvings: List[int] = Field(default_factory=list)
    multipliers: List[List[float]] = Field(default_factory=list)
    converged: bool = False
    tolerance: Optional[float] = None
    final_residual: Optional[float] = None
    # converged on the stagnation rule with final_residual above tolerance
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.step_sizes)


class HomotopyStep(BaseModel):
    """One attempted continuation step."""
    t: float
    step: float
    accepted: bool
    newton_iterations: int
    residual_norms: List[float] = Field(default_factory=list)
    reason: Optional[str] = None


class PathSample(BaseModel):
    """Admissibility of the homotopy path at one t."""
    t: float
    min_eigenvalue: float  # of W(q(t)^(-1/k)), convexity of q(t)^(-1/k)
    min_boundary_derivative: float  # of q(t) along the outward co-normal
    admissible: bool


class ValidationReport(BaseModel):
    """Outcome of the hypothesis checks on f."""
    min_f: float
    positive: bool
    ortho_defect: List[float] = Field(default_factory=list)
    ortho_tolerance: float
    convexity_min_eigenvalue: float
    boundary_min_derivative: float
    warnings: List[str] = Field(default_factory=list)


class ConvexityCertificate(BaseModel):
    """Eigenvalue evidence for strict convexity of the solution."""
    node_min_eigenvalues: List[float]
    node_max_eigenvalues: List[float]
    global_min_eigenvalue: float
    global_max_eigenvalue: float
    worst_node: int
    rank_monitor: Dict[int, float]  # l -> min over nodes of sigma_{l+1}(W)
    epsilon: float
    strictly_convex: bool


class BoundMonitor(BaseModel):
    """Runtime values standing in for the a priori bounds."""
    min_h: float
    max_h: float
    max_gradient: float
    max_eigenvalue: float


class SolveReport(BaseModel):
    """Trace and diagnostics of a solve."""
    n: int
    k: int
    minkowski_mode: bool = False
    theta: float
    mode: GridMode
    n_rho: int
    n_phi: int
    homotopy_steps: int
    newton_total: int
    t_reached: float
    final_residual: float
    projected_residual: float
    min_eigenvalue_W: float
    rank_profile: List[float]
    ortho_defect: List[float]
    robin_defect: float
    kernel_multipliers: List[float] = Field(default_factory=list)
    integral_identity: List[float] = Field(default_factory=list)
    boundary_cross_term: float = 0.0
    bounds: Optional[BoundMonitor] = None
    certificate: Optional[ConvexityCertificate] = None
    validation: Optional[ValidationReport] = None
    path: List[PathSample] = Field(default_factory=list)
    steps: List[HomotopyStep] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    recovery_error: Optional[float] = None
    wall_time: float = 0.0


class MeasureReport(BaseModel):
    """Capillary area measures and identity residuals of a body."""
    measures: Dict[int, float]
    mask_size: int
    quermassintegrals: List[float]
    minkowski_residuals: List[float]
    steiner_samples: List[float]
    steiner_residual: Optional[float] = None  # None when the body is not strictly convex
    volume: float
    surface_area: float


class VerificationCheck(BaseModel):
    """One measured invariant with its tolerance."""
    name: str
    value: Optional[float] = None
    tolerance: float
    passed: bool
    skipped: bool = False
    detail: Optional[str] = None


class VerificationReport(BaseModel):
    """All invariants measured by the verification suite."""
    checks: List[VerificationCheck] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed or check.skipped for check in self.checks)


class ArtifactStatus(BaseModel):
    """Model for tracking artifact tool availability and errors."""
    tool_name: str
    available: bool
    error_message: Optional[str] = None
    last_check: datetime


class ProblemBlock(BaseModel):
    """[problem] section of a run configuration."""
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    k: int = Field(ge=1)
    theta: float = Field(gt=0.0, lt=pi, description="Contact angle in radians")
    mode: GridMode = GridMode.FULL
    n_rho: int = Field(default=64, ge=4)
    n_phi: int = Field(default=64, ge=1)

    @model_validator(mode="after")
    def _check_orders(self) -> "ProblemBlock":
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        return self


class FieldSourceBlock(BaseModel):
    """[f] section: exactly one data source plus builtin parameters."""
    model_config = ConfigDict(extra="forbid")

    builtin: Optional[str] = None
    csv: Optional[str] = None
    manufactured_from: Optional[str] = None
    value: Optional[float] = None
    eps: float = 0.05
    profile: str = "cos2"
    coefficients: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "FieldSourceBlock":
        given = [s for s in (self.builtin, self.csv, self.manufactured_from) if s is not None]
        if len(given) != 1:
            raise ValueError("exactly one of builtin, csv, manufactured_from must be set")
        return self


class OutputBlock(BaseModel):
    """[output] section of a run configuration."""
    model_config = ConfigDict(extra="forbid")

    directory: str = "out"
    artifacts: List[str] = Field(default_factory=lambda: ["h", "report", "body", "vertex_data"])


class RunConfig(BaseModel):
    """A complete run configuration loaded from TOML."""
    model_config = ConfigDict(extra="forbid")

    problem: ProblemBlock
    f: FieldSourceBlock
    solver: SolverSettings = Field(default_factory=SolverSettings)
    output: OutputBlock = Field(default_factory=OutputBlock)
    source_path: Optional[str] = Field(default=None, exclude=True)

    @property
    def domain(self) -> CapDomain:
        return CapDomain(n=self.problem.n, theta=self.problem.theta)


class PipelineOutcome(BaseModel):
    """Result of a command pipeline: exit code plus user-facing summary."""
    command: str
    exit_code: int
    message: str
    error_kind: Optional[str] = None
    warnings: List[str] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.exit_code == 0
