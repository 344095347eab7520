"""Population-level bias analysis of the double-calibration estimator.

All regressions here are ordinary (unweighted) least squares over strata of
the finite population, so they need y for every unit of the frame; this is a
tool for simulated or census-like populations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from doublecal.design import DomainError
from doublecal.estimators import Basis, Subset, weighted_fit
from doublecal.frame import Frame, TotalsBundle, require_valid
from doublecal.numcore import SINGULARITY_TOL, SingularSystem

FloatArray = npt.NDArray[np.float64]

COEFFICIENT_NAMES = ("b_r", "b_nr", "d_r", "d_b", "d_nb")


@dataclass(frozen=True)
class PopulationRegressions:
    """Least-squares coefficients per stratum; None where a fit is unavailable.

    b_r, b_nr: y on X over the respondent / nonrespondent strata of U_B.
    d_r, d_b, d_nb: y on Z over the respondent stratum, U_B, and U - U_B.
    """

    b_r: FloatArray | None
    b_nr: FloatArray | None
    d_r: FloatArray | None
    d_b: FloatArray | None
    d_nb: FloatArray | None
    unavailable: dict[str, str] = field(default_factory=dict)


class BiasTerms(NamedTuple):
    nonresponse: float
    condition2: float
    undercoverage: float

    @property
    def total(self) -> float:
        return self.nonresponse + self.condition2 + self.undercoverage


@dataclass(frozen=True)
class BiasReport:
    ae: float
    t_y: float
    t_y_b: float
    approx_rb: float
    coefficients: PopulationRegressions
    term_nonresponse: float
    term_condition2: float
    term_undercoverage: float


def _fit(vectors, y, basis, tol):
    return weighted_fit(vectors, y, np.ones(y.shape[0]), basis, Subset.POPULATION_STRATUM, tol).coeffs


def population_regressions(frame: Frame, tol: float = SINGULARITY_TOL) -> PopulationRegressions:
    require_valid(frame)
    if np.any(np.isnan(frame.y)):
        raise DomainError("population regressions need y for every unit of the frame")
    resp = frame.in_b & frame.r
    nonresp = frame.in_b & ~frame.r
    strata = {
        "b_r": (Basis.X, resp),
        "b_nr": (Basis.X, nonresp),
        "d_r": (Basis.Z, resp),
        "d_b": (Basis.Z, frame.in_b),
        "d_nb": (Basis.Z, ~frame.in_b),
    }
    coeffs: dict[str, FloatArray | None] = {}
    unavailable: dict[str, str] = {}
    for name, (basis, mask) in strata.items():
        vectors = (frame.x if basis is Basis.X else frame.z)[mask]
        if not mask.any():
            coeffs[name] = None
            unavailable[name] = "empty stratum"
            continue
        try:
            coeffs[name] = _fit(vectors, frame.y[mask], basis, tol)
        except SingularSystem as err:
            coeffs[name] = None
            unavailable[name] = f"singular: {err}"
    return PopulationRegressions(**coeffs, unavailable=unavailable)


def _require_intercept(frame: Frame) -> None:
    if not frame.intercept:
        raise DomainError("bias analysis assumes the unit constant leads both X and Z")


def bias_decomposition(
    frame: Frame,
    totals: TotalsBundle,
    regs: PopulationRegressions | None = None,
) -> BiasTerms:
    """Split AE - T_Y into nonresponse, respondent-vs-U_B and coverage terms.

    nonresponse = (b_R - b_NR)' T_X(NR); condition2 = (d_R - d_B)'(T_Z - T_Z(B));
    undercoverage = (d_B - d_NB)'(T_Z - T_Z(B)). A term is 0 when its stratum is
    empty (full response / full coverage).
    """
    _require_intercept(frame)
    regs = regs or population_regressions(frame)
    gap = totals.coverage_gap
    if regs.b_r is None or regs.d_r is None or regs.d_b is None:
        raise SingularSystem("respondent or U_B fit unavailable: " + repr(regs.unavailable), pivot=-1)
    has_nr = bool(np.any(frame.in_b & ~frame.r))
    has_nb = bool(np.any(~frame.in_b))
    if has_nr and regs.b_nr is None:
        raise SingularSystem("nonrespondent fit unavailable: " + regs.unavailable["b_nr"], pivot=-1)
    if has_nb and regs.d_nb is None:
        raise SingularSystem("out-of-frame fit unavailable: " + regs.unavailable["d_nb"], pivot=-1)
    nonresponse = float((regs.b_r - regs.b_nr) @ totals.t_x_nr) if has_nr else 0.0
    condition2 = float((regs.d_r - regs.d_b) @ gap)
    undercoverage = float((regs.d_b - regs.d_nb) @ gap) if has_nb else 0.0
    return BiasTerms(nonresponse, condition2, undercoverage)


def approximate_expectation(frame: Frame, totals: TotalsBundle) -> BiasReport:
    """First-order expectation b_R' T_X(B) + d_R'(T_Z - T_Z(B)) and its bias terms."""
    _require_intercept(frame)
    regs = population_regressions(frame)
    if regs.b_r is None or regs.d_r is None:
        raise SingularSystem("respondent-stratum fit unavailable: " + repr(regs.unavailable), pivot=-1)
    ae = float(regs.b_r @ totals.t_x_b + regs.d_r @ totals.coverage_gap)
    t_y = float(frame.y.sum())
    terms = bias_decomposition(frame, totals, regs)
    return BiasReport(
        ae=ae,
        t_y=t_y,
        t_y_b=float(frame.y[frame.in_b].sum()),
        approx_rb=(ae - t_y) / t_y,
        coefficients=regs,
        term_nonresponse=terms.nonresponse,
        term_condition2=terms.condition2,
        term_undercoverage=terms.undercoverage,
    )
