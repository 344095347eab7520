"""Artificial populations: tri-variate normal (X, Z, Y) with prefix coverage and response.

Units 0..N_B-1 form U_B; the first N_B(R) of them respond. Because all units
are iid draws, the strata share one regression structure, which is what makes
the double-calibration estimator approximately unbiased on these populations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from doublecal.frame import Frame
from doublecal.numcore import SingularSystem, cholesky

FloatArray = npt.NDArray[np.float64]

DEFAULT_SAMPLE_SIZES = (75, 100, 150, 250, 375, 500)
DEFAULT_CORRELATIONS = (0.3, 0.6, 0.9)
DEFAULT_RESPONDENTS = (2250, 4500, 6750)


class RhoXZPolicy(enum.Enum):
    EXPLICIT = "explicit"
    MINIMAL_FEASIBLE = "minimal_feasible"
    ZERO_OR_MINIMAL = "zero_or_minimal"


class CovarianceError(ValueError):
    def __init__(self, message: str, minimal_rho_xz: float):
        self.minimal_rho_xz = minimal_rho_xz
        super().__init__(message)


def min_feasible_rho_xz(rho_xy: float, rho_zy: float) -> float:
    """Infimum of rho_XZ keeping the correlation matrix positive definite (open bound)."""
    return rho_xy * rho_zy - math.sqrt((1.0 - rho_xy**2) * (1.0 - rho_zy**2))


def correlation_determinant(rho_xy: float, rho_zy: float, rho_xz: float) -> float:
    return 1.0 - rho_xy**2 - rho_zy**2 - rho_xz**2 + 2.0 * rho_xy * rho_zy * rho_xz


@dataclass(frozen=True)
class ScenarioConfig:
    """One population scenario.

    ``rho_xz_policy`` picks the X-Z correlation: an explicit value, the
    smallest positive-definite value plus ``rho_xz_epsilon``, or (default) zero
    whenever zero is feasible and the minimal feasible value otherwise.
    """

    rho_xy: float = 0.3
    rho_zy: float = 0.3
    n_total: int = 10_000
    n_b: int = 7_500
    n_resp: int = 2_250
    rho_xz_policy: RhoXZPolicy = RhoXZPolicy.ZERO_OR_MINIMAL
    rho_xz: float = 0.0
    rho_xz_epsilon: float = 1e-3
    means: tuple[float, float, float] = (1.0, 1.0, 2.0)
    variances: tuple[float, float, float] = (1.0, 1.0, 4.0)
    sample_sizes: tuple[int, ...] = DEFAULT_SAMPLE_SIZES
    replicates: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.n_resp <= self.n_b <= self.n_total:
            raise ValueError(
                f"need 0 < N_B(R) <= N_B <= N, got {self.n_resp}, {self.n_b}, {self.n_total}"
            )
        for name in ("rho_xy", "rho_zy"):
            if not -1.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1)")
        if min(self.variances) <= 0:
            raise ValueError("variances must be positive")

    @property
    def cv_y(self) -> float:
        return math.sqrt(self.variances[2]) / self.means[2]

    def resolved_rho_xz(self) -> float:
        lower = min_feasible_rho_xz(self.rho_xy, self.rho_zy)
        if self.rho_xz_policy is RhoXZPolicy.EXPLICIT:
            return self.rho_xz
        if self.rho_xz_policy is RhoXZPolicy.MINIMAL_FEASIBLE:
            return lower + self.rho_xz_epsilon
        return 0.0 if lower < 0.0 else lower + self.rho_xz_epsilon


def build_covariance(config: ScenarioConfig) -> FloatArray:
    """3x3 covariance of (X, Z, Y); raises CovarianceError when not positive definite."""
    rho_xz = config.resolved_rho_xz()
    corr = np.array(
        [
            [1.0, rho_xz, config.rho_xy],
            [rho_xz, 1.0, config.rho_zy],
            [config.rho_xy, config.rho_zy, 1.0],
        ]
    )
    sd = np.sqrt(np.asarray(config.variances, dtype=np.float64))
    cov = corr * np.outer(sd, sd)
    lower = min_feasible_rho_xz(config.rho_xy, config.rho_zy)
    if abs(rho_xz) >= 1.0 or correlation_determinant(config.rho_xy, config.rho_zy, rho_xz) <= 0:
        raise CovarianceError(
            f"covariance not positive definite for rho_XY={config.rho_xy}, "
            f"rho_ZY={config.rho_zy}, rho_XZ={rho_xz:g}; minimal feasible rho_XZ is "
            f"{lower:.4f} (exclusive)",
            minimal_rho_xz=lower,
        )
    try:
        cholesky(cov)
    except SingularSystem as err:
        raise CovarianceError(str(err), minimal_rho_xz=lower) from None
    return cov


@dataclass(frozen=True, eq=False)
class GeneratedFrame:
    frame: Frame
    config: ScenarioConfig
    rho_xz: float
    t_y: float
    cv_y: float
    achieved_corr: dict[str, float] = field(default_factory=dict)
    achieved_means: tuple[float, float, float] = (0.0, 0.0, 0.0)


def draw_variables(config: ScenarioConfig, rng: np.random.Generator) -> FloatArray:
    """N x 3 array of (X, Z, Y): mean + L @ standard-normal triple per unit."""
    low = cholesky(build_covariance(config))
    std = rng.standard_normal((config.n_total, 3))
    return std @ low.T + np.asarray(config.means)


def generate_population(config: ScenarioConfig, rng: np.random.Generator | int | None = None) -> GeneratedFrame:
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(config.seed if rng is None else rng)
    data = draw_variables(config, rng)
    x, z, y = data[:, 0], data[:, 1], data[:, 2]
    pos = np.arange(config.n_total)
    in_b = pos < config.n_b
    frame = Frame.from_arrays(
        y=y,
        z=z,
        x=x[: config.n_b],
        in_b=in_b,
        r=pos < config.n_resp,
        with_intercept=True,
    )
    corr = np.corrcoef(np.column_stack([x[in_b], z[in_b], y[in_b]]), rowvar=False)
    t_y = float(y.sum())
    return GeneratedFrame(
        frame=frame,
        config=config,
        rho_xz=config.resolved_rho_xz(),
        t_y=t_y,
        cv_y=float(np.std(y) / np.mean(y)),
        achieved_corr={
            "xz": float(corr[0, 1]),
            "xy": float(corr[0, 2]),
            "zy": float(np.corrcoef(z, y)[0, 1]),
        },
        achieved_means=(float(x[in_b].mean()), float(z.mean()), float(y.mean())),
    )


def scenario_grid(**overrides) -> list[ScenarioConfig]:
    """The 27 population scenarios (3 rho_XY x 3 rho_ZY x 3 response sizes)."""
    return [
        ScenarioConfig(rho_xy=rxy, rho_zy=rzy, n_resp=nr, **overrides)
        for rxy in DEFAULT_CORRELATIONS
        for rzy in DEFAULT_CORRELATIONS
        for nr in DEFAULT_RESPONDENTS
    ]
