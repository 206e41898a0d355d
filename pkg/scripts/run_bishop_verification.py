#!/usr/bin/env python3
"""Bishop solver verification sweep over the built-in graph manifolds.

Reports contraction ratios, norm-bound margins, the measured Phi^h
comparison constant, and tau-control residuals; prints the calibrated
t-thresholds for reference.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from feketelab.bishop import calibrate_t_threshold
from feketelab.circle import CircleGrid
from feketelab.cli import cmd_bishop
from feketelab.config import ExperimentConfig

OUT = os.path.join(os.path.dirname(__file__), "..", "out", "bishop_verification")


def main():
    os.makedirs(OUT, exist_ok=True)
    grid = CircleGrid(1024)
    status = 0
    for n, h in ((1, "quad:0.5"), (2, "quad:0.5"), (2, "mix:0.5"), (2, "quad:0.1")):
        cfg = ExperimentConfig(
            name=f"bishop-n{n}-{h.replace(':', '')}", kind="bishop", disc_n=n,
            grid_m=1024, t_list=(0.02, 0.05), samples=20, h_spec=h, seed=13,
            out_dir=OUT,
        )
        th = calibrate_t_threshold(cfg.manifold_key(), grid, False)
        rec = cmd_bishop(cfg)
        rec.write_csv(os.path.join(OUT, f"{cfg.name}.csv"))
        rec.write_timings(os.path.join(OUT, f"{cfg.name}_timings.csv"))
        print(f"{cfg.name}: t-threshold {th:.3f}, all pass: {rec.all_pass()}")
        if not rec.all_pass():
            status = 2
    return status


if __name__ == "__main__":
    sys.exit(main())
