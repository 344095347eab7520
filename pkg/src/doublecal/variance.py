"""Linearised variance of the double-calibration estimator.

The estimator is a smooth function of HT totals, so to first order it equals a
constant plus the HT total of per-unit influence values u_j. Its approximate
variance is then the usual fixed-size-design variance of that HT total, and
the Sen-Yates-Grundy form evaluated on empirical influence values estimates it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from doublecal.design import Design, DesignKind, DomainError, SampleDraw, SampleProbabilities
from doublecal.estimators import (
    Basis,
    EstimateReport,
    Subset,
    fit_double_calibration,
    sample_rows,
    weighted_fit,
)
from doublecal.frame import Frame, TotalsBundle
from doublecal.numcore import SINGULARITY_TOL, solve_spd

FloatArray = npt.NDArray[np.float64]


class InfluenceKind(enum.Enum):
    POPULATION = "population"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class InfluenceSet:
    values: FloatArray
    kind: InfluenceKind
    b: FloatArray
    d: FloatArray


def influence_values(
    y: FloatArray,
    x: FloatArray,
    z: FloatArray,
    r: npt.NDArray[np.bool_],
    gram_x: FloatArray,
    b: FloatArray,
    gram_z: FloatArray,
    d: FloatArray,
    t_x_b: FloatArray,
    z_gap: FloatArray,
) -> FloatArray:
    """u_j = r_j e_j^X x_j'A^-1 T_X(B) + r_j e_j^Z z_j'C^-1 gap - d'z_j.

    e^X, e^Z are the residuals of y on the X and Z fits; ``z_gap`` is T_Z minus
    the (true or estimated) Z-total of U_B. Non-respondents contribute only the
    last term, so their y may be NaN.
    """
    lever_x = solve_spd(gram_x, t_x_b, context="influence X")
    lever_z = solve_spd(gram_z, z_gap, context="influence Z")
    zd = z @ d
    resid_x = np.where(r, y - x @ b, 0.0)
    resid_z = np.where(r, y - zd, 0.0)
    return resid_x * (x @ lever_x) + resid_z * (z @ lever_z) - zd


def influence_population(
    frame: Frame, totals: TotalsBundle, tol: float = SINGULARITY_TOL
) -> InfluenceSet:
    """Influence values u_j for every unit of U_B (in U_B order)."""
    rows = frame.b_rows
    resp = rows[frame.r[rows]]
    ones = np.ones(resp.shape[0])
    fx = weighted_fit(frame.x[resp], frame.y[resp], ones, Basis.X, Subset.POPULATION_STRATUM, tol)
    fz = weighted_fit(frame.z[resp], frame.y[resp], ones, Basis.Z, Subset.POPULATION_STRATUM, tol)
    u = influence_values(
        frame.y[rows], frame.x[rows], frame.z[rows], frame.r[rows],
        fx.gram, fx.coeffs, fz.gram, fz.coeffs, totals.t_x_b, totals.t_z - totals.t_z_b,
    )
    return InfluenceSet(u, InfluenceKind.POPULATION, fx.coeffs, fz.coeffs)


def influence_empirical(
    frame: Frame,
    sample: SampleDraw,
    pi: npt.ArrayLike,
    totals: TotalsBundle,
    tol: float = SINGULARITY_TOL,
) -> InfluenceSet:
    """Influence values with every population quantity replaced by its HT estimate."""
    fit = fit_double_calibration(frame, sample, pi, totals, tol)
    return _empirical_from_fit(frame, sample, fit, totals)


def _empirical_from_fit(frame, sample, fit, totals) -> InfluenceSet:
    rows = sample_rows(frame, sample)
    u = influence_values(
        frame.y[rows], frame.x[rows], frame.z[rows], frame.r[rows],
        fit.fit_x.gram, fit.fit_x.coeffs, fit.fit_z.gram, fit.fit_z.coeffs,
        totals.t_x_b, totals.t_z - fit.t_z_b_hat,
    )
    return InfluenceSet(u, InfluenceKind.EMPIRICAL, fit.fit_x.coeffs, fit.fit_z.coeffs)


def syg_pairwise(
    values: FloatArray, pi: FloatArray, pi_joint: FloatArray, sample: bool = False
) -> float:
    """sum_{h>j} (pi_j pi_h - pi_jh) (v_j/pi_j - v_h/pi_h)^2, by explicit pairs.

    With ``sample=True`` each pair is further divided by pi_jh, giving the
    Sen-Yates-Grundy estimator over the sampled units.
    """
    v = np.asarray(values, dtype=np.float64) / pi
    weight = np.outer(pi, pi) - pi_joint
    if sample:
        weight = weight / pi_joint
    diff = v[:, None] - v[None, :]
    iu = np.triu_indices(v.shape[0], k=1)
    return math.fsum((weight * diff * diff)[iu])


def _srswor_reduction(values: FloatArray, n_b: int, n: int) -> float:
    if values.shape[0] < 2:
        return 0.0
    return n_b * (n_b - n) * float(np.var(values, ddof=1)) / n


def approx_variance(u: InfluenceSet | FloatArray, design: Design) -> float:
    """First-order variance of the estimator from population influence values.

    SRSWOR uses N_B(N_B-n) S_u^2 / n with S_u^2 the N_B-1 divisor variance;
    other designs use the pairwise sum directly.
    """
    values = u.values if isinstance(u, InfluenceSet) else np.asarray(u, dtype=np.float64)
    if values.shape[0] != design.n_b:
        raise DomainError(f"expected {design.n_b} influence values, got {values.shape[0]}")
    if design.kind is DesignKind.SRSWOR:
        return _srswor_reduction(values, design.n_b, design.n)
    if design.is_census:
        return 0.0
    return syg_pairwise(values, design.first_order(), design.second_order())


def syg_variance(u_hat: InfluenceSet | FloatArray, probs: SampleProbabilities) -> float:
    """Sen-Yates-Grundy variance estimate from empirical influence values."""
    values = u_hat.values if isinstance(u_hat, InfluenceSet) else np.asarray(u_hat, dtype=np.float64)
    if probs.srswor is not None:
        n_b, n_design = probs.srswor
        return _srswor_reduction(values, n_b, n_design)
    pj = np.asarray(probs.pi_joint, dtype=np.float64)
    if pj.ndim == 2:
        off = ~np.eye(values.shape[0], dtype=bool)
        zero_pair = np.any(pj[off] <= 0)
    else:
        zero_pair = values.shape[0] > 1 and pj <= 0
    if zero_pair:
        raise DomainError("a sampled pair has zero joint inclusion probability")
    return syg_pairwise(values, probs.pi, pj, sample=True)


def finalize_report(
    total: float,
    variance: float,
    n_respondents: int = 0,
    design: str = "",
) -> EstimateReport:
    """Attach V = sqrt(variance), RRMSE = V/T and the interval T +/- 2V."""
    if variance < 0:
        raise ArithmeticError(f"negative variance estimate {variance}")
    se = math.sqrt(variance)
    return EstimateReport(
        total=total,
        variance=variance,
        rrmse=se / total if total != 0 else None,
        ci_low=total - 2.0 * se,
        ci_high=total + 2.0 * se,
        n_respondents=n_respondents,
        design=design,
    )


def _describe(design: Design) -> str:
    if design.kind is DesignKind.SRSWOR:
        return f"SRSWOR N_B={design.n_b} n={design.n}"
    return f"explicit N_B={design.n_b} n={design.n}"


def estimate(
    frame: Frame,
    sample: SampleDraw,
    design: Design,
    totals: TotalsBundle,
    tol: float = SINGULARITY_TOL,
) -> EstimateReport:
    """Double-calibration estimate with its SYG variance, RRMSE and interval."""
    return estimate_from_probabilities(
        frame, sample, design.probabilities(sample), totals, _describe(design), tol
    )


def estimate_from_probabilities(
    frame: Frame,
    sample: SampleDraw,
    probs: SampleProbabilities,
    totals: TotalsBundle,
    design_label: str = "",
    tol: float = SINGULARITY_TOL,
) -> EstimateReport:
    """As ``estimate`` when only the sampled units' probabilities are known."""
    fit = fit_double_calibration(frame, sample, probs.pi, totals, tol)
    u_hat = _empirical_from_fit(frame, sample, fit, totals)
    return finalize_report(fit.total, syg_variance(u_hat, probs), fit.fit_x.n_units, design_label)
