"""Spread of the first-order relative bias across regenerated populations.

Shows how much the approximate RB of a scenario moves from one generated
frame to the next.

    python3 scripts/frame_spread.py --frames 200
"""

import argparse

import numpy as np

from doublecal.diagnostics import approximate_expectation
from doublecal.frame import compute_totals
from doublecal.mc import cell_seed
from doublecal.simgen import DEFAULT_CORRELATIONS, ScenarioConfig, generate_population


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--n-resp", type=int, default=2250)
    args = ap.parse_args()

    print("rho_xy rho_zy   mean_rb%  sd_rb%   min    max")
    for rho in DEFAULT_CORRELATIONS:
        cfg = ScenarioConfig(rho_xy=rho, rho_zy=rho, n_resp=args.n_resp)
        rb = np.array([
            100 * approximate_expectation(g.frame, compute_totals(g.frame)).approx_rb
            for g in (
                generate_population(cfg, np.random.default_rng([cell_seed(s, cfg), 0]))
                for s in range(args.frames)
            )
        ])
        print(f"{rho:6.1f} {rho:6.1f} {rb.mean():9.2f} {rb.std(ddof=1):7.2f} {rb.min():6.2f} {rb.max():6.2f}")


if __name__ == "__main__":
    main()
