from __future__ import annotations
from enum import Enum
from typing import Annotated, Literal, Sequence

import numpy as np
from pydantic import (
    BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt,
    field_validator, model_validator,
)

from ..errors import DomainError
from ..utils.rng import default_seed

WEIGHT_TOL = 1e-12


# ──────────────────────────────────────────────────────────────────────────────
# Domain Value Objects
# ──────────────────────────────────────────────────────────────────────────────
class DoseDomain(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = Field(ge=0.0)
    b: float

    @model_validator(mode="after")
    def _ordered(self) -> DoseDomain:
        if not self.b > self.a:
            raise ValueError(f"dose domain needs a < b, got a={self.a}, b={self.b}")
        return self

    @property
    def width(self) -> float:
        return self.b - self.a

    def __str__(self):
        return f"[{self.a:g}, {self.b:g}]"


class EmaxParams(BaseModel):
    """theta0 baseline, theta1 asymptotic maximum effect, theta2 half-effect offset."""
    model_config = ConfigDict(frozen=True)

    theta0: float
    theta1: float
    theta2: float

    @classmethod
    def from_array(cls, v: Sequence[float]) -> EmaxParams:
        return cls(theta0=float(v[0]), theta1=float(v[1]), theta2=float(v[2]))

    @classmethod
    def checked(
        cls,
        theta0: float,
        theta1: float,
        theta2: float,
        domain: DoseDomain,
        relaxed: bool = False,
        doses: Sequence[float] | None = None,
    ) -> EmaxParams:
        p = cls(theta0=theta0, theta1=theta1, theta2=theta2)
        if not p.is_admissible(domain, relaxed=relaxed, doses=doses):
            mode = "relaxed" if relaxed else "strict"
            raise DomainError(f"{p} is not admissible ({mode}) on {domain}")
        return p

    def is_admissible(
        self,
        domain: DoseDomain,
        relaxed: bool = False,
        doses: Sequence[float] | None = None,
    ) -> bool:
        """
        strict:  theta1 > 0 and theta2 > -a (increasing concave branch on [a,b])
        relaxed: finite, and no dose in `doses` (default a, b) sits on x = -theta2
        """
        v = self.as_array()
        if not np.all(np.isfinite(v)):
            return False
        if relaxed:
            pts = (domain.a, domain.b) if doses is None else doses
            return all(x + self.theta2 != 0.0 for x in pts)
        return self.theta1 > 0.0 and self.theta2 > -domain.a

    def as_array(self) -> np.ndarray:
        return np.array([self.theta0, self.theta1, self.theta2], dtype=float)

    def __str__(self):
        return f"θ=({self.theta0:.6g}, {self.theta1:.6g}, {self.theta2:.6g})"


class TildeParams(BaseModel):
    """Parameters in the shifted frame x~ = x - a."""
    model_config = ConfigDict(frozen=True)

    t0: float
    t1: float
    t2: float

    def is_admissible(self) -> bool:
        return self.t1 > 0.0 and self.t2 > 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.t0, self.t1, self.t2], dtype=float)

    def __str__(self):
        return f"θ~=({self.t0:.6g}, {self.t1:.6g}, {self.t2:.6g})"


class ThreePointDesign(BaseModel):
    model_config = ConfigDict(frozen=True)

    domain: DoseDomain
    x2: float
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    @model_validator(mode="after")
    def _valid(self) -> ThreePointDesign:
        if not self.domain.a < self.x2 < self.domain.b:
            raise ValueError(f"central dose x2={self.x2} must lie inside {self.domain}")
        if any(w < 0 for w in self.weights):
            raise ValueError(f"design weights must be non-negative, got {self.weights}")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"design weights must sum to 1, got {sum(self.weights)!r}")
        return self

    @property
    def doses(self) -> tuple[float, float, float]:
        return (self.domain.a, self.x2, self.domain.b)

    def __str__(self):
        xs = ", ".join(f"{x:g}" for x in self.doses)
        ws = ", ".join(f"{w:.4g}" for w in self.weights)
        return f"ξ = {{x: ({xs}); ω: ({ws})}}"


class NoiseModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: PositiveFloat


# ──────────────────────────────────────────────────────────────────────────────
# Sufficient statistics & shape classification
# ──────────────────────────────────────────────────────────────────────────────
class SufficientStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: tuple[float, float, float]
    n: tuple[PositiveInt, PositiveInt, PositiveInt]
    ybar: tuple[float, float, float]

    @field_validator("x")
    @classmethod
    def _increasing(cls, x: tuple[float, float, float]):
        if not x[0] < x[1] < x[2]:
            raise ValueError(f"doses must be strictly increasing, got {x}")
        return x

    @property
    def total_n(self) -> int:
        return sum(self.n)

    @property
    def domain(self) -> DoseDomain:
        return DoseDomain(a=self.x[0], b=self.x[2])

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.x, dtype=float),
            np.asarray(self.n, dtype=float),
            np.asarray(self.ybar, dtype=float),
        )

    def __str__(self):
        rows = [f"x={x:g} n={n} ȳ={y:.6g}" for x, n, y in zip(self.x, self.n, self.ybar)]
        return "; ".join(rows)


class ShapeStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    m1: float
    m2: float
    m0: float
    q0: float
    ybar23: float
    ybar: float


class ShapeCase(str, Enum):
    INCREASING_CONCAVE = "increasing_concave"
    CASE1A = "case1a"
    CASE1B = "case1b"
    CASE2A = "case2a"
    CASE2B = "case2b"

    @property
    def is_case1(self) -> bool:
        return self in (ShapeCase.CASE1A, ShapeCase.CASE1B)

    @property
    def is_case2(self) -> bool:
        return self in (ShapeCase.CASE2A, ShapeCase.CASE2B)


class ShapeClass(BaseModel):
    """`boundary` flags an exact tie in a defining inequality; `ties` names them."""
    model_config = ConfigDict(frozen=True)

    case: ShapeCase
    boundary: bool = False
    ties: tuple[str, ...] = ()

    def __str__(self):
        return self.case.value + (f" (boundary: {', '.join(self.ties)})" if self.boundary else "")


class StepAtA(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["step_at_a"] = "step_at_a"
    at: float
    low: float
    high: float

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.at, self.low, self.high)

    def __str__(self):
        return f"step at x={self.at:g}: {self.low:.6g} → {self.high:.6g}"


class Constant(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["constant"] = "constant"
    level: float

    def evaluate(self, x) -> np.ndarray:
        return np.full_like(np.asarray(x, dtype=float), self.level)

    def __str__(self):
        return f"constant y={self.level:.6g}"


class Line(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["line"] = "line"
    slope: float
    intercept: float

    def evaluate(self, x) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def __str__(self):
        return f"line y={self.intercept:.6g} + {self.slope:.6g}·x"


# Discriminated union
LimitingFit = Annotated[StepAtA | Constant | Line, Field(discriminator="kind")]


# ──────────────────────────────────────────────────────────────────────────────
# Estimation results
# ──────────────────────────────────────────────────────────────────────────────
class FailureReason(str, Enum):
    DIVERGENCE = "divergence"
    INADMISSIBLE_ROOT = "inadmissible_root"
    ITERATION_CAP = "iteration_cap"


class ExactMLE(BaseModel):
    kind: Literal["exact_mle"] = "exact_mle"
    params: EmaxParams
    tilde: TildeParams
    # False when the shifted-frame t2 < a: theta2 in (-a, 0) with theta1 < 0
    admissible: bool = True

    def __str__(self):
        flag = "" if self.admissible else " (not admissible: theta1 < 0)"
        return f"exact MLE {self.params} / {self.tilde}{flag}"


class NoMLE(BaseModel):
    kind: Literal["no_mle"] = "no_mle"
    shape: ShapeClass
    limit: LimitingFit

    def __str__(self):
        return f"no MLE ({self.shape}); limiting fit: {self.limit}"


class FirthEstimate(BaseModel):
    kind: Literal["firth_estimate"] = "firth_estimate"
    params: EmaxParams
    score_norm: float
    iterations: int
    start: str = "user"

    def __str__(self):
        return f"Firth estimate {self.params} (‖U*‖∞={self.score_norm:.3g}, {self.iterations} it)"


class FirthFailure(BaseModel):
    kind: Literal["firth_failure"] = "firth_failure"
    reason: FailureReason
    detail: str = ""

    def __str__(self):
        return f"Firth failure: {self.reason.value}" + (f" ({self.detail})" if self.detail else "")


FitResult = Annotated[
    ExactMLE | NoMLE | FirthEstimate | FirthFailure,
    Field(discriminator="kind"),
]


class SolverOpts(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: PositiveFloat = 1e-8
    max_iter: NonNegativeInt = 200            # 0 only evaluates the starts
    theta2_cap: PositiveFloat | None = None     # None -> 1e6 * (b - a)
    starts: tuple[Literal["user", "interpolant", "grid"], ...] = ("user", "interpolant", "grid")
    grid_exponents: tuple[int, ...] = tuple(range(-6, 7))

    def cap_for(self, domain: DoseDomain) -> float:
        return self.theta2_cap if self.theta2_cap is not None else 1e6 * domain.width


# ──────────────────────────────────────────────────────────────────────────────
# Firth machinery
# ──────────────────────────────────────────────────────────────────────────────
class DesignMoments(BaseModel):
    """
    first[l2]  = E[x   / (theta2 + x)^l2], l2 = 0..5
    second[l2] = E[x^2 / (theta2 + x)^l2], l2 = 0..8
    """
    model_config = ConfigDict(frozen=True)

    first: tuple[float, ...]
    second: tuple[float, ...]
    v11: float
    v12: float
    cov12: float
    d: float

    def M(self, l1: int, l2: int) -> float:
        if l1 == 1:
            return self.first[l2]
        if l1 == 2:
            return self.second[l2]
        raise IndexError(f"moment order l1={l1} not tabulated")


class FirthCorrection(BaseModel):
    model_config = ConfigDict(frozen=True)

    a1: float
    a2: float
    a3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3], dtype=float)


class InfoMatrices(BaseModel):
    observed: list[list[float]]
    expected: list[list[float]]
    q1: list[list[float]]
    q2: list[list[float]]
    q3: list[list[float]]


# ──────────────────────────────────────────────────────────────────────────────
# Probabilities & scenarios
# ──────────────────────────────────────────────────────────────────────────────
class ProbMethod(str, Enum):
    MC = "mc"
    QUAD = "quad"


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    truth: EmaxParams
    design: ThreePointDesign
    noise: NoiseModel
    n_per_point: tuple[PositiveInt, PositiveInt, PositiveInt] = (6, 6, 6)

    def with_(self, theta2: float | None = None, x2: float | None = None) -> Scenario:
        """Copy with the true theta2 and/or the central dose replaced."""
        truth = self.truth if theta2 is None else self.truth.model_copy(update={"theta2": theta2})
        design = self.design if x2 is None else ThreePointDesign(
            domain=self.design.domain, x2=x2, weights=self.design.weights
        )
        return Scenario(truth=truth, design=design, noise=self.noise, n_per_point=self.n_per_point)


class ShapeProbabilities(BaseModel):
    p_exists: float
    p_case1a: float
    p_case1b: float
    p_case2: float
    se_exists: float = 0.0
    se_case1a: float = 0.0
    se_case1b: float = 0.0
    se_case2: float = 0.0
    method: ProbMethod
    draws: int | None = None

    @property
    def p_case1(self) -> float:
        return self.p_case1a + self.p_case1b

    @property
    def total(self) -> float:
        return self.p_exists + self.p_case1a + self.p_case1b + self.p_case2


class SweepRow(BaseModel):
    x2: float
    theta2_true: float
    p_exists: float
    p_case1a: float
    p_case1b: float
    p_case2: float
    se_exists: float
    se_case1a: float
    se_case1b: float
    se_case2: float


class AlphaRow(BaseModel):
    theta2_g: float
    alpha: float
    x2: float | None
    dopt_x2: float


class SweepIn(BaseModel):
    scenario: Scenario
    theta2_list: list[float] = [12.5, 25.0, 50.0, 75.0, 100.0]
    x2_grid: list[float] | None = None
    grid_points: PositiveInt = 64
    alpha_list: list[float] = []
    method: ProbMethod = ProbMethod.QUAD
    draws: PositiveInt = 100_000
    seed: int = Field(default_factory=default_seed, ge=0)


class SweepOut(BaseModel):
    rows: list[SweepRow]
    alpha_rows: list[AlphaRow] = []


# ──────────────────────────────────────────────────────────────────────────────
# Simulation study & guideline workflow (processor I/O contracts)
# ──────────────────────────────────────────────────────────────────────────────
class SimConfig(BaseModel):
    scenario: Scenario
    theta2_g_list: list[float] = [12.5, 25.0, 50.0, 75.0, 100.0]
    replicates: PositiveInt = 10_000
    seed: int = Field(default_factory=default_seed, ge=0)
    solver: SolverOpts = SolverOpts()
    theoretical: ProbMethod = ProbMethod.QUAD
    threads: PositiveInt | None = None


class SimRow(BaseModel):
    theta2_g: float
    x2: float
    replicates: int
    n_exists: int
    n_case1: int
    n_case2: int
    n_firth_success_case1: int
    n_firth_success_case2: int
    failure_counts: dict[str, int] = {}
    n_mle_degenerate: int = 0                  # "exists" samples whose means are numerically collinear
    pct_mle_exists: float
    pct_case1: float
    pct_case2: float
    pct_firth_success_case1: float | None      # None <=> "NA" (no Case 1 samples)
    pct_firth_success_case2: float | None
    theory_exists: float
    theory_case1: float
    theory_case2: float

    @model_validator(mode="after")
    def _partition(self) -> SimRow:
        if self.n_exists + self.n_case1 + self.n_case2 != self.replicates:
            raise ValueError("class counts must partition the replicates")
        return self


class Table1Out(BaseModel):
    config: SimConfig
    rows: list[SimRow]

    def __str__(self):
        return f"Table 1 replication: {len(self.rows)} rows, N={self.config.replicates}"


class GuidelineConfig(BaseModel):
    """
    Settings for the practical decision workflow:
      - noise:     known sigma (estimated from replicates when omitted)
      - theta2_g:  guessed theta2 behind the design (recovered from x2 when omitted)
      - theta2_1:  smaller guess for the augmentation point (default halves theta2_g + a)
      - alpha:     significance level for the alpha-based augmentation point
      - guess:     guessed (theta0, theta1) needed by the alpha machinery
    """
    noise: NoiseModel | None = None
    theta2_g: float | None = None
    theta2_1: float | None = None
    alpha: float | None = Field(None, gt=0.0, lt=1.0)
    guess: EmaxParams | None = None
    solver: SolverOpts = SolverOpts()


class GuidelineIn(BaseModel):
    stats: SufficientStats
    sigma_hat: float | None = None


class Recommendation(BaseModel):
    rationale: Literal["case1_augment"] = "case1_augment"
    theta2_g: float
    theta2_1: float
    dopt_point: float
    alpha: float | None = None
    alpha_point: float | None = None
    contained: bool = True
    note: str = ""

    def __str__(self):
        txt = f"add observations at x={self.dopt_point:.6g} (x*(θ2={self.theta2_1:g}))"
        if self.alpha_point is not None:
            txt += f"; α={self.alpha:g} point x={self.alpha_point:.6g}"
        return txt


class GuidelineReport(BaseModel):
    stats: SufficientStats
    shape: ShapeClass
    shape_stats: ShapeStats
    rationale: Literal["exact_mle", "firth_case2", "augment_case1"]
    fit: FitResult
    limit: LimitingFit | None = None
    recommendation: Recommendation | None = None

    def __str__(self):
        lines = [f"Data: {self.stats}", f"Shape: {self.shape}", f"Fit: {self.fit}"]
        if self.recommendation:
            lines.append(f"Recommendation: {self.recommendation}")
        return "\n".join(lines)


# ──────────────────────────────────────────────────────────────────────────────
# Command reports
# ──────────────────────────────────────────────────────────────────────────────
class ShapeReport(BaseModel):
    stats: SufficientStats
    shape: ShapeClass
    shape_stats: ShapeStats
    limit: LimitingFit | None = None

    def __str__(self):
        txt = f"{self.shape}\n  m1={self.shape_stats.m1:.6g} m2={self.shape_stats.m2:.6g} m0={self.shape_stats.m0:.6g}"
        return txt + (f"\n  limiting fit: {self.limit}" if self.limit else "")


class DesignReport(BaseModel):
    mode: Literal["dopt", "alpha"]
    theta2: float
    design: ThreePointDesign
    alpha: float | None = None
    power: float | None = None


# ──────────────────────────────────────────────────────────────────────────────
# Parser Configurations
# ──────────────────────────────────────────────────────────────────────────────
class DoseResponseCsvConfig(BaseModel):
    """
    Configuration for DoseResponseCsvParser:
      - path: CSV with header `dose,response`, one row per observation
      - sep: delimiter (default ',')
      - encoding: file encoding (default utf-8)
    """
    path: str
    sep: str = ","
    encoding: str = "utf-8"


class ScenarioSamplerConfig(BaseModel):
    """
    Configuration for ScenarioSampler:
      - scenario: truth, design, noise and group sizes to draw from
      - seed / stream: key of the counter-based stream (replayable)
    """
    scenario: Scenario
    seed: int = Field(default_factory=default_seed, ge=0)
    stream: tuple[int, ...] = (0, 0)


class RunManifest(BaseModel):
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    version: str
    timestamp: str
