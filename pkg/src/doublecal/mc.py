"""Monte Carlo evaluation of the double-calibration strategy on generated populations.

For every population cell one frame is generated and reused for all sample
sizes; each replicate draws an SRSWOR sample from U_B, computes the estimate,
its SYG variance and the interval T +/- 2V. Random streams are derived from
(cell seed, n, replicate id) so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import warnings
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from doublecal.design import Design, DomainError, draw_srswor, SampleDraw
from doublecal.diagnostics import approximate_expectation
from doublecal.frame import TotalsBundle, compute_totals
from doublecal.numcore import SingularSystem
from doublecal.simgen import GeneratedFrame, ScenarioConfig, generate_population
from doublecal.variance import approx_variance, estimate, influence_population

MAX_FAILED_FRACTION = 0.01


def rrmse_benchmark(n_total: int, n: int, cv_y: float) -> float:
    """RRMSE of the HT total under SRSWOR of n from N with full response."""
    if not 0 < n <= n_total:
        raise DomainError(f"benchmark needs 0 < n <= N, got n={n}, N={n_total}")
    return math.sqrt((n_total - n) / (n_total * n)) * cv_y


@dataclass(frozen=True)
class CellRow:
    n: int
    rb_pct: float
    arrmse_pct: float
    rrmse_pct: float
    benchmark_pct: float
    errmsee_pct: float
    cov95_pct: float
    replicates: int
    n_failed: int
    valid: bool


@dataclass(frozen=True)
class ScenarioResult:
    rho_xy: float
    rho_zy: float
    rho_xz: float
    n_resp: int
    approx_rb_pct: float
    seed: int
    fingerprint: str
    rows: tuple[CellRow, ...] = field(default_factory=tuple)


def cell_seed(master_seed: int, config: ScenarioConfig) -> int:
    """Stable 63-bit seed from the master seed and the cell coordinates."""
    key = f"{master_seed}|{config.rho_xy!r}|{config.rho_zy!r}|{config.n_resp}|{config.n_b}|{config.n_total}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


def replicate_rng(seed: int, n: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng([seed, n, replicate])


def run_cell(
    gen: GeneratedFrame,
    n: int,
    replicates: int,
    seed: int,
    totals: TotalsBundle | None = None,
) -> CellRow:
    """Monte Carlo metrics (in percent) for one sample size on a fixed population."""
    frame = gen.frame
    totals = totals or compute_totals(frame)
    census = n == frame.n_b
    design = Design.census(frame.n_b) if census else Design.srswor(frame.n_b, n)
    t_y = float(frame.y.sum())
    arrmse = 0.0 if census else math.sqrt(approx_variance(influence_population(frame, totals), design)) / t_y

    estimates: list[float] = []
    rel_se: list[float] = []
    covered = 0
    failed = 0
    for i in range(replicates):
        if census:
            draw = SampleDraw(indices=np.arange(frame.n_b))
        else:
            draw = draw_srswor(frame.n_b, n, replicate_rng(seed, n, i))
        try:
            rep = estimate(frame, draw, design, totals)
        except (SingularSystem, DomainError):
            failed += 1
            continue
        if rep.rrmse is None:
            failed += 1
            continue
        estimates.append(rep.total)
        rel_se.append(rep.rrmse)
        covered += rep.ci_low <= t_y <= rep.ci_high
    ok = len(estimates)
    valid = failed <= MAX_FAILED_FRACTION * replicates and ok > 0
    if failed:
        warnings.warn(f"n={n}: {failed} of {replicates} replicates failed and were excluded", stacklevel=2)
    if ok == 0:
        nan = float("nan")
        return CellRow(n, nan, 100 * arrmse, nan, nan, nan, nan, replicates, failed, False)
    mean_est = math.fsum(estimates) / ok
    mse = math.fsum((t - t_y) ** 2 for t in estimates) / ok
    bench = rrmse_benchmark(frame.n_total, n, gen.config.cv_y)
    return CellRow(
        n=n,
        rb_pct=100 * (mean_est - t_y) / t_y,
        arrmse_pct=100 * arrmse,
        rrmse_pct=100 * math.sqrt(mse) / t_y,
        benchmark_pct=100 * bench,
        errmsee_pct=100 * math.fsum(rel_se) / ok,
        cov95_pct=100 * covered / ok,
        replicates=replicates,
        n_failed=failed,
        valid=valid,
    )


def run_scenario(
    config: ScenarioConfig,
    replicates: int | None = None,
    master_seed: int = 0,
    sample_sizes: Sequence[int] | None = None,
) -> ScenarioResult:
    """Generate the cell's population once and evaluate every sample size on it."""
    seed = cell_seed(master_seed, config)
    gen = generate_population(config, np.random.default_rng([seed, 0]))
    totals = compute_totals(gen.frame)
    bias = approximate_expectation(gen.frame, totals)
    reps = config.replicates if replicates is None else replicates
    sizes = config.sample_sizes if sample_sizes is None else tuple(sample_sizes)
    rows = tuple(run_cell(gen, n, reps, seed, totals) for n in sizes)
    return ScenarioResult(
        rho_xy=config.rho_xy,
        rho_zy=config.rho_zy,
        rho_xz=gen.rho_xz,
        n_resp=config.n_resp,
        approx_rb_pct=100 * bias.approx_rb,
        seed=seed,
        fingerprint=gen.frame.fingerprint(),
        rows=rows,
    )


def _scenario_job(args):
    config, replicates, master_seed = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_scenario(config, replicates, master_seed)


def run_grid(
    configs: Iterable[ScenarioConfig],
    replicates: int | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[ScenarioResult]:
    """Run every cell; results come back in input order whatever ``workers`` is."""
    jobs = [(c, replicates, master_seed) for c in configs]
    if workers <= 1:
        return [run_scenario(c, r, s) for c, r, s in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scenario_job, jobs))


CSV_FIELDS = (
    "rho_xy", "rho_zy", "rho_xz", "n_resp", "approx_rb_pct", "n", "rb_pct", "arrmse_pct",
    "rrmse_pct", "benchmark_pct", "errmsee_pct", "cov95_pct", "replicates", "n_failed",
    "valid", "seed", "fingerprint",
)


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def results_to_csv(results: Sequence[ScenarioResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for res in results:
        head = asdict(replace(res, rows=()))
        for row in res.rows:
            rec = {**head, **asdict(row)}
            w.writerow([_cell(rec[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def _pct(v: float) -> str:
    return f"{v:.1f}"


def format_table(results: Sequence[ScenarioResult]) -> str:
    """Plain-text tables laid out like the published ones (percent, one decimal)."""
    out: list[str] = []
    last = None
    for res in results:
        key = (res.rho_xy, res.rho_zy)
        if key != last:
            if out:
                out.append("")
            out.append(f"rho_XY={res.rho_xy:g}  rho_ZY={res.rho_zy:g}  rho_XZ={res.rho_xz:.3f}")
            last = key
        out.append(f"N_B(R)={res.n_resp}")
        out.append(f"Approximate relative bias {_pct(res.approx_rb_pct)}")
        out.append(f"{'n':>5} {'RB':>6} {'ARRMSE':>7} {'RRMSE':>14} {'ERRMSEE':>8} {'COV95':>6}")
        for row in res.rows:
            rr = f"{_pct(row.rrmse_pct)} ({_pct(row.benchmark_pct)})"
            flag = "" if row.valid else "  *invalid*"
            out.append(
                f"{row.n:>5} {_pct(row.rb_pct):>6} {_pct(row.arrmse_pct):>7} {rr:>14} "
                f"{_pct(row.errmsee_pct):>8} {_pct(row.cov95_pct):>6}{flag}"
            )
    return "\n".join(out) + "\n"
