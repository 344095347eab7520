"""Horvitz-Thompson totals, calibration fits and the double-calibration estimator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from doublecal.design import DomainError, SampleDraw
from doublecal.frame import Frame, TotalsBundle
from doublecal.numcore import SINGULARITY_TOL, solve_spd, sym_matrix

FloatArray = npt.NDArray[np.float64]


class Basis(enum.Enum):
    X = "x"
    Z = "z"


class Subset(enum.Enum):
    RESPONDENTS = "respondents"
    FULL_SAMPLE = "full_sample"
    POPULATION_STRATUM = "population_stratum"


@dataclass(frozen=True, eq=False)
class CalibrationFit:
    """Weighted normal equations ``gram @ coeffs = moment`` for y on one basis."""

    gram: FloatArray
    moment: FloatArray
    coeffs: FloatArray
    basis: Basis
    subset: Subset
    n_units: int


@dataclass(frozen=True)
class EstimateReport:
    total: float
    variance: float | None
    rrmse: float | None
    ci_low: float | None
    ci_high: float | None
    n_respondents: int
    design: str = ""

    @property
    def std_error(self) -> float | None:
        return None if self.variance is None else math.sqrt(self.variance)


def ht_total(values: npt.ArrayLike, pi: npt.ArrayLike) -> float | FloatArray:
    """Horvitz-Thompson total; ``values`` may be a vector or one row per unit."""
    v = np.asarray(values, dtype=np.float64)
    p = np.asarray(pi, dtype=np.float64)
    if p.shape[0] != v.shape[0]:
        raise DomainError("values and pi are not aligned")
    if np.any(p <= 0):
        raise DomainError("inclusion probabilities must be positive")
    w = 1.0 / p
    if v.ndim == 1:
        return float(w @ v)
    return w @ v


def weighted_fit(
    vectors: FloatArray,
    y: FloatArray,
    weights: FloatArray,
    basis: Basis,
    subset: Subset,
    tol: float = SINGULARITY_TOL,
) -> CalibrationFit:
    """Least-squares fit of y on ``vectors`` with unit weights ``weights``."""
    wv = vectors * weights[:, None]
    gram = sym_matrix(wv.T @ vectors)
    moment = wv.T @ y
    coeffs = solve_spd(gram, moment, tol=tol, context=f"regression of y on {basis.name} over {subset.value}")
    return CalibrationFit(gram, moment, coeffs, basis, subset, int(vectors.shape[0]))


def sample_rows(frame: Frame, sample: SampleDraw) -> npt.NDArray[np.intp]:
    return frame.b_rows[sample.indices]


def _basis_matrix(frame: Frame, basis: Basis) -> FloatArray:
    return frame.x if basis is Basis.X else frame.z


def fit_regression(
    frame: Frame,
    sample: SampleDraw,
    pi: npt.ArrayLike,
    basis: Basis,
    subset: Subset = Subset.RESPONDENTS,
    tol: float = SINGULARITY_TOL,
) -> CalibrationFit:
    """pi-weighted regression of y on the X or Z basis over the sample or its respondents."""
    rows = sample_rows(frame, sample)
    p = np.asarray(pi, dtype=np.float64)
    if subset is Subset.RESPONDENTS:
        keep = frame.r[rows]
    elif subset is Subset.FULL_SAMPLE:
        keep = np.ones(rows.shape[0], dtype=bool)
    else:
        raise ValueError("population-stratum fits are unweighted; see diagnostics.population_regressions")
    rows, p = rows[keep], p[keep]
    y = frame.y[rows]
    if np.any(np.isnan(y)):
        raise DomainError(f"survey value unavailable for units used in the {subset.value} fit")
    return weighted_fit(_basis_matrix(frame, basis)[rows], y, 1.0 / p, basis, subset, tol)


def first_calibration(fit_x_r: CalibrationFit, t_x_b: npt.ArrayLike) -> float:
    """Respondent-based calibration estimate of T_Y(B): b_R' T_X(B)."""
    if fit_x_r.basis is not Basis.X or fit_x_r.subset is not Subset.RESPONDENTS:
        raise ValueError("first calibration needs the X-basis fit on respondents")
    t = np.asarray(t_x_b, dtype=np.float64)
    if t.shape != fit_x_r.coeffs.shape:
        raise DomainError(f"T_X(B) has shape {t.shape}, coefficients {fit_x_r.coeffs.shape}")
    return float(fit_x_r.coeffs @ t)


def _require_intercept(vectors: FloatArray, what: str) -> None:
    if vectors.shape[1] == 0 or not np.all(vectors[:, 0] == 1.0):
        raise DomainError(f"the unit constant must be the first {what} auxiliary")


def virtual_calibration(
    frame: Frame,
    sample: SampleDraw,
    pi: npt.ArrayLike,
    t_z: npt.ArrayLike,
) -> tuple[float, float]:
    """Full-response Z-calibration in its two algebraically equal forms.

    Returns ``(d_B' T_Z, T_Y(B)_HT + d_B'(T_Z - T_Z(B)_HT))``. Only computable
    when y is known on the whole sample, so it serves as a reference.
    """
    rows = sample_rows(frame, sample)
    p = np.asarray(pi, dtype=np.float64)
    _require_intercept(frame.z[rows], "Z")
    fit = fit_regression(frame, sample, p, Basis.Z, Subset.FULL_SAMPLE)
    tz = np.asarray(t_z, dtype=np.float64)
    form3 = float(fit.coeffs @ tz)
    form4 = ht_total(frame.y[rows], p) + float(fit.coeffs @ (tz - ht_total(frame.z[rows], p)))
    return form3, form4


@dataclass(frozen=True, eq=False)
class DoubleCalibrationFit:
    fit_x: CalibrationFit
    fit_z: CalibrationFit
    t_z_b_hat: FloatArray
    total: float


def fit_double_calibration(
    frame: Frame,
    sample: SampleDraw,
    pi: npt.ArrayLike,
    totals: TotalsBundle,
    tol: float = SINGULARITY_TOL,
) -> DoubleCalibrationFit:
    rows = sample_rows(frame, sample)
    p = np.asarray(pi, dtype=np.float64)
    resp = frame.r[rows]
    if not resp.any():
        raise DomainError("sample contains no respondents")
    _require_intercept(frame.x[rows[resp]], "X")
    _require_intercept(frame.z[rows], "Z")
    fit_x = fit_regression(frame, sample, p, Basis.X, Subset.RESPONDENTS, tol)
    fit_z = fit_regression(frame, sample, p, Basis.Z, Subset.RESPONDENTS, tol)
    t_z_b_hat = ht_total(frame.z[rows], p)
    total = first_calibration(fit_x, totals.t_x_b) + float(fit_z.coeffs @ (totals.t_z - t_z_b_hat))
    return DoubleCalibrationFit(fit_x, fit_z, t_z_b_hat, total)


def double_calibration(
    frame: Frame,
    sample: SampleDraw,
    pi: npt.ArrayLike,
    totals: TotalsBundle,
    tol: float = SINGULARITY_TOL,
) -> EstimateReport:
    """Point estimate b_R' T_X(B) + d_R'(T_Z - T_Z(B)_HT); variance left empty.

    Use ``variance.estimate`` for the report with its linearised variance.
    """
    fit = fit_double_calibration(frame, sample, pi, totals, tol)
    return EstimateReport(
        total=fit.total,
        variance=None,
        rrmse=None,
        ci_low=None,
        ci_high=None,
        n_respondents=fit.fit_x.n_units,
    )
