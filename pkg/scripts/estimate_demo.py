"""End-to-end estimate workflow on a generated population.

Exports a population, draws an SRSWOR sample from its frame, writes the sample
extract and a config with externally supplied totals, then runs
``doublecal estimate`` on them.

    python3 scripts/estimate_demo.py --out demo/
"""

import argparse
from pathlib import Path

import numpy as np

from doublecal import cli
from doublecal.design import draw_srswor
from doublecal.frame import compute_totals, export_csv
from doublecal.simgen import ScenarioConfig, generate_population


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("demo"))
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    gen = generate_population(ScenarioConfig(), args.seed)
    frame = gen.frame
    draw = draw_srswor(frame.n_b, args.n, np.random.default_rng(args.seed))
    export_csv(frame.subset(frame.b_rows[draw.indices]), args.out / "sample.csv")
    totals = compute_totals(frame)
    # externally supplied totals exclude the unit constant
    cfg = args.out / "estimate.cfg"
    cfg.write_text(
        "input = sample.csv\n"
        "x_columns = x1\n"
        "z_columns = z1\n"
        "design = srswor\n"
        f"n_b = {frame.n_b}\n"
        f"n = {args.n}\n"
        f"n_total = {frame.n_total}\n"
        f"t_x_b = {float(totals.t_x_b[1])!r}\n"
        f"t_z = {float(totals.t_z[1])!r}\n"
    )
    print(f"true total {gen.t_y!r}")
    raise SystemExit(cli.run(["estimate", "--config", str(cfg)]))


if __name__ == "__main__":
    main()
