"""Grid search for the appearance demo configuration.

A candidate (slope, end_radius) qualifies when the initial profile has no
stable slice, a stable slice appears before ``t_max``, the width flag is
false at ``t = 0`` and later turns true, and a stable slice is present from
the first flagged time on.  Results go to ``configs/appearance_search.csv``.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from hooklab.minimal import appearance_profile, appearance_run

SLOPES = (0.02, 0.05, 0.1, 0.2, 0.4)
END_RADII = (0.3, 0.5)
REGION = (0.8, 1.0)
T_MAX = 0.05


def evaluate(args):
    slope, end_radius = args
    r = appearance_run(appearance_profile(slope, end_radius=end_radius), REGION, boundary="lo", t_max=T_MAX)
    none_at_start = not any(z.verdict == "stable" for z in r.initial_slices)
    ok = (none_at_start and math.isfinite(r.t_appear) and not r.flag[0] and math.isfinite(r.t_flag)
          and r.stable_at_flag)
    return [slope, end_radius, none_at_start, r.t_appear, r.t_flag, bool(r.flag[0]), r.stable_at_flag, ok]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "configs"
                        / "appearance_search.csv")
    parser.add_argument("--jobs", type=int, default=4)
    args = parser.parse_args(argv)
    grid = list(itertools.product(SLOPES, END_RADII))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(evaluate, grid))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slope", "end_radius", "no_stable_at_start", "t_appear", "t_flag", "flag_at_start",
                    "stable_at_flag", "qualifies"])
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else str(v).lower() for v in row])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
