"""Command-line entry points: ``estimate``, ``simulate`` and ``diagnose``.

Configuration is a flat ``key = value`` file (``#`` starts a comment); any key
can be overridden with ``--set key=value`` and the common keys have their own
flags. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from doublecal import mc
from doublecal.design import Design, DomainError, SampleDraw, SampleProbabilities
from doublecal.diagnostics import COEFFICIENT_NAMES, approximate_expectation
from doublecal.estimators import EstimateReport
from doublecal.frame import (
    ColumnMap,
    CsvError,
    FrameError,
    TotalsBundle,
    compute_totals,
    export_csv,
    ingest_csv,
)
from doublecal.numcore import SingularSystem
from doublecal.simgen import (
    DEFAULT_CORRELATIONS,
    DEFAULT_RESPONDENTS,
    DEFAULT_SAMPLE_SIZES,
    CovarianceError,
    RhoXZPolicy,
    ScenarioConfig,
    build_covariance,
    generate_population,
)
from doublecal.variance import estimate_from_probabilities

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class RunConfig:
    mode: str
    values: dict[str, str] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def has(self, key: str) -> bool:
        return self.values.get(key, "") != ""

    def get(self, key: str, default: str | None = None) -> str:
        if self.has(key):
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing required config field {key!r} for {self.mode}")
        return default

    def path(self, key: str) -> Path:
        p = Path(self.get(key))
        return p if p.is_absolute() else self.base_dir / p

    def integer(self, key: str, default: int | None = None) -> int:
        raw = self.get(key, None if default is None else str(default))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config field {key!r}: {raw!r} is not an integer") from None

    def real(self, key: str, default: float | None = None) -> float:
        raw = self.get(key, None if default is None else repr(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config field {key!r}: {raw!r} is not a number") from None

    def reals(self, key: str, default: tuple[float, ...] | None = None) -> tuple[float, ...]:
        if not self.has(key):
            if default is None:
                raise ConfigError(f"missing required config field {key!r} for {self.mode}")
            return default
        try:
            return tuple(float(v) for v in re.split(r"[,\s]+", self.values[key].strip()))
        except ValueError:
            raise ConfigError(f"config field {key!r}: expected comma-separated numbers") from None

    def names(self, key: str, default: tuple[str, ...] = ()) -> tuple[str, ...]:
        if not self.has(key):
            return default
        return tuple(v.strip() for v in self.values[key].split(",") if v.strip())

    def flag(self, key: str, default: bool) -> bool:
        raw = self.get(key, "true" if default else "false").lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config field {key!r}: {raw!r} is not a boolean")


def column_map(cfg: RunConfig) -> ColumnMap:
    z = cfg.names("z_columns")
    if not z:
        raise ConfigError("missing required config field 'z_columns'")
    in_b = cfg.values.get("in_b_column", "in_b")
    return ColumnMap(
        id=cfg.get("id_column", "id"),
        y=cfg.get("y_column", "y"),
        in_b=in_b or None,
        r=cfg.get("r_column", "r"),
        x=cfg.names("x_columns"),
        z=z,
        missing=cfg.values.get("missing", ""),
    )


# estimate -------------------------------------------------------------------


def _supplied_totals(cfg: RunConfig, intercept: bool) -> TotalsBundle:
    t_x_b = np.array(cfg.reals("t_x_b"))
    t_z = np.array(cfg.reals("t_z"))
    if intercept:
        t_x_b = np.concatenate([[cfg.integer("n_b")], t_x_b])
        t_z = np.concatenate([[cfg.integer("n_total")], t_z])
    # T_Z(B) is estimated from the sample, never read from here.
    return TotalsBundle(t_z=t_z, t_z_b=np.full_like(t_z, np.nan), t_x_b=t_x_b)


def _sample_probabilities(cfg: RunConfig, sample_frame) -> tuple[SampleProbabilities, str]:
    n = sample_frame.n_total
    kind = cfg.get("design", "srswor").lower()
    draw = SampleDraw(indices=np.arange(n))
    if kind == "srswor":
        n_b = cfg.integer("n_b")
        n_design = cfg.integer("n", n)
        if n_design != n:
            raise ConfigError(f"config n={n_design} but the input holds {n} sampled rows")
        return Design.srswor(n_b, n).probabilities(draw), f"SRSWOR N_B={n_b} n={n}"
    if kind == "census":
        return Design.census(n).probabilities(draw), f"census N_B={n}"
    if kind == "explicit":
        return _explicit_probabilities(cfg, sample_frame), f"explicit n={n}"
    raise ConfigError(f"config field 'design': unknown design {kind!r}")


def _explicit_probabilities(cfg: RunConfig, sample_frame) -> SampleProbabilities:
    pi_col = cfg.get("pi_column")
    id_col = cfg.get("id_column", "id")
    pi_by_id: dict[str, float] = {}
    with open(cfg.path("input"), newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(fh), start=2):
            if pi_col not in rec:
                raise CsvError("pi column not found", lineno, pi_col)
            try:
                pi_by_id[rec[id_col]] = float(rec[pi_col])
            except ValueError:
                raise CsvError(f"cannot parse {rec[pi_col]!r}", lineno, pi_col) from None
    ids = [str(i) for i in sample_frame.ids]
    pos = {u: k for k, u in enumerate(ids)}
    pi = np.array([pi_by_id[u] for u in ids])
    joint = np.full((len(ids), len(ids)), np.nan)
    np.fill_diagonal(joint, pi)
    with open(cfg.path("pi_joint_path"), newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                a, b, v = pos[rec["id_a"]], pos[rec["id_b"]], float(rec["pi_joint"])
            except (KeyError, ValueError, TypeError):
                raise CsvError("expected columns id_a, id_b, pi_joint naming sampled ids", lineno) from None
            joint[a, b] = joint[b, a] = v
    if np.isnan(joint).any():
        raise FrameError("pi_joint file does not cover every pair of sampled units")
    return SampleProbabilities(pi=pi, pi_joint=joint)


def cmd_estimate(cfg: RunConfig) -> EstimateReport:
    schema = column_map(cfg)
    intercept = cfg.flag("with_intercept", True)
    source = cfg.get("totals", "supplied").lower()
    if source == "supplied":
        for key in ("t_x_b", "t_z"):
            cfg.get(key)
    elif source != "frame":
        raise ConfigError(f"config field 'totals': expected 'supplied' or 'frame', got {source!r}")
    sample_frame = ingest_csv(cfg.path("input"), schema, with_intercept=intercept)
    if not sample_frame.in_b.all():
        raise FrameError("estimation input must hold sampled units of U_B only")
    if source == "frame":
        population = ingest_csv(cfg.path("population"), schema, with_intercept=intercept)
        totals = compute_totals(population)
    else:
        totals = _supplied_totals(cfg, intercept)
    probs, label = _sample_probabilities(cfg, sample_frame)
    draw = SampleDraw(indices=np.arange(sample_frame.n_total))
    tol = cfg.real("singularity_tol", 1e-12)
    return estimate_from_probabilities(sample_frame, draw, probs, totals, label, tol)


def format_estimate(rep: EstimateReport, fmt: str) -> str:
    fields = {
        "total": rep.total,
        "std_error": rep.std_error,
        "variance": rep.variance,
        "rrmse": rep.rrmse,
        "ci_low": rep.ci_low,
        "ci_high": rep.ci_high,
        "n_respondents": rep.n_respondents,
        "design": rep.design,
    }

    def show(v):
        if v is None:
            return "undefined"
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)

    if fmt == "csv":
        return ",".join(fields) + "\n" + ",".join(show(v) for v in fields.values()) + "\n"
    width = max(len(k) for k in fields)
    return "".join(f"{k:<{width}}  {show(v)}\n" for k, v in fields.items())


# simulate -------------------------------------------------------------------


def scenario_configs(cfg: RunConfig) -> list[ScenarioConfig]:
    policy_raw = cfg.get("rho_xz_policy", RhoXZPolicy.ZERO_OR_MINIMAL.value)
    try:
        policy = RhoXZPolicy(policy_raw)
    except ValueError:
        raise ConfigError(f"config field 'rho_xz_policy': unknown policy {policy_raw!r}") from None
    common = dict(
        n_total=cfg.integer("n_total", 10_000),
        n_b=cfg.integer("n_b", 7_500),
        rho_xz_policy=policy,
        rho_xz=cfg.real("rho_xz", 0.0),
        rho_xz_epsilon=cfg.real("rho_xz_epsilon", 1e-3),
        sample_sizes=tuple(int(v) for v in cfg.reals("sample_sizes", DEFAULT_SAMPLE_SIZES)),
        replicates=cfg.integer("replicates", 10_000),
    )
    configs = []
    try:
        for rxy in cfg.reals("rho_xy", DEFAULT_CORRELATIONS):
            for rzy in cfg.reals("rho_zy", DEFAULT_CORRELATIONS):
                for nr in cfg.reals("n_resp", DEFAULT_RESPONDENTS):
                    configs.append(ScenarioConfig(rho_xy=rxy, rho_zy=rzy, n_resp=int(nr), **common))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    for c in configs:
        for n in c.sample_sizes:
            if not 0 < n < c.n_b:
                raise ConfigError(f"sample size {n} must satisfy 0 < n < N_B={c.n_b}")
        try:
            build_covariance(c)
        except CovarianceError as err:
            raise ConfigError(str(err)) from None
    return configs


def cmd_simulate(cfg: RunConfig) -> list[mc.ScenarioResult]:
    configs = scenario_configs(cfg)
    workers = cfg.integer("workers", 1)
    if workers == 0:
        workers = os.cpu_count() or 1
    return mc.run_grid(
        configs,
        replicates=cfg.integer("replicates", 10_000),
        master_seed=cfg.integer("seed", 0),
        workers=workers,
    )


# diagnose -------------------------------------------------------------------


def diagnose_frame(cfg: RunConfig):
    if cfg.has("input"):
        return ingest_csv(cfg.path("input"), column_map(cfg), with_intercept=cfg.flag("with_intercept", True))
    try:
        scen = ScenarioConfig(
            rho_xy=cfg.real("rho_xy", 0.3),
            rho_zy=cfg.real("rho_zy", 0.3),
            n_total=cfg.integer("n_total", 10_000),
            n_b=cfg.integer("n_b", 7_500),
            n_resp=cfg.integer("n_resp", 2_250),
            rho_xz_policy=RhoXZPolicy(cfg.get("rho_xz_policy", RhoXZPolicy.ZERO_OR_MINIMAL.value)),
            rho_xz=cfg.real("rho_xz", 0.0),
            rho_xz_epsilon=cfg.real("rho_xz_epsilon", 1e-3),
        )
        gen = generate_population(scen, np.random.default_rng([mc.cell_seed(cfg.integer("seed", 0), scen), 0]))
    except CovarianceError as err:
        raise ConfigError(str(err)) from None
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if cfg.has("frame_out"):
        export_csv(gen.frame, cfg.path("frame_out"))
    return gen.frame


def cmd_diagnose(cfg: RunConfig):
    frame = diagnose_frame(cfg)
    return approximate_expectation(frame, compute_totals(frame))


def format_diagnosis(rep, fmt: str) -> str:
    regs = rep.coefficients
    rows: list[tuple[str, str]] = []
    for name in COEFFICIENT_NAMES:
        v = getattr(regs, name)
        shown = (
            f"unavailable ({regs.unavailable.get(name, '')})"
            if v is None
            else " ".join(repr(float(c)) for c in v)
        )
        rows.append((name, shown))
    rows += [
        ("term_nonresponse", repr(rep.term_nonresponse)),
        ("term_condition2", repr(rep.term_condition2)),
        ("term_undercoverage", repr(rep.term_undercoverage)),
        ("ae", repr(rep.ae)),
        ("t_y", repr(rep.t_y)),
        ("t_y_b", repr(rep.t_y_b)),
        ("approx_rb", repr(rep.approx_rb)),
        ("approx_rb_pct", f"{100 * rep.approx_rb:.1f}"),
    ]
    if fmt == "csv":
        return "key,value\n" + "".join(f"{k},{v}\n" for k, v in rows)
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in rows)


# entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doublecal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in (
        ("estimate", "double-calibration estimate, SYG variance and 95% interval from sample data"),
        ("simulate", "Monte Carlo grid over generated populations"),
        ("diagnose", "population regressions and first-order bias decomposition"),
    ):
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--out", type=Path, help="output path (simulate writes <out>.csv and <out>.txt)")
        p.add_argument("--format", choices=("csv", "table"))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, str] = {}
    base = Path(".")
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        values.update(parse_config_text(text, str(args.config)))
        base = args.config.parent
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.replicates is not None:
        values["replicates"] = str(args.replicates)
    if args.format is not None:
        values["format"] = args.format
    return RunConfig(mode=args.mode, values=values, base_dir=base)


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        fmt = cfg.get("format", "table")
        if fmt not in ("csv", "table"):
            raise ConfigError(f"config field 'format': {fmt!r} is not csv or table")
        if args.mode == "estimate":
            _write(format_estimate(cmd_estimate(cfg), fmt), args.out)
        elif args.mode == "diagnose":
            _write(format_diagnosis(cmd_diagnose(cfg), fmt), args.out)
        else:
            results = cmd_simulate(cfg)
            table = mc.format_table(results)
            if args.out is None:
                sys.stdout.write(mc.results_to_csv(results) if fmt == "csv" else table)
            else:
                args.out.with_suffix(".csv").write_text(mc.results_to_csv(results))
                args.out.with_suffix(".txt").write_text(table)
    except ConfigError as err:
        return _fail("config", err, EXIT_CONFIG)
    except CsvError as err:
        return _fail("parse", err, EXIT_DATA)
    except (FrameError, OSError) as err:
        return _fail("data", err, EXIT_DATA)
    except SingularSystem as err:
        return _fail("singular", err, EXIT_NUMERIC)
    except DomainError as err:
        return _fail("domain", err, EXIT_NUMERIC)
    return EXIT_OK


def _fail(category: str, err: Exception, code: int) -> int:
    sys.stderr.write(f"error[{category}]: {err}\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
