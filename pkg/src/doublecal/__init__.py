"""Design-based double-calibration estimation for surveys with under-coverage and nonresponse."""

from doublecal.design import Design, DomainError, SampleDraw, draw_srswor, srswor_probs
from doublecal.diagnostics import approximate_expectation, bias_decomposition, population_regressions
from doublecal.estimators import (
    double_calibration,
    first_calibration,
    fit_regression,
    ht_total,
    virtual_calibration,
)
from doublecal.frame import ColumnMap, Frame, TotalsBundle, compute_totals, export_csv, ingest_csv, validate
from doublecal.numcore import SingularSystem, cholesky, solve_spd
from doublecal.simgen import ScenarioConfig, generate_population, min_feasible_rho_xz
from doublecal.variance import (
    approx_variance,
    estimate,
    finalize_report,
    influence_empirical,
    influence_population,
    syg_variance,
)

__all__ = [
    "ColumnMap", "Design", "DomainError", "Frame", "SampleDraw", "ScenarioConfig",
    "SingularSystem", "TotalsBundle", "approx_variance", "approximate_expectation",
    "bias_decomposition", "cholesky", "compute_totals", "double_calibration", "draw_srswor",
    "estimate", "export_csv", "finalize_report", "first_calibration", "fit_regression",
    "generate_population", "ht_total", "influence_empirical", "influence_population",
    "ingest_csv", "min_feasible_rho_xz", "population_regressions", "solve_spd", "srswor_probs",
    "syg_variance", "validate", "virtual_calibration",
]
