"""Preliminary run that fixes the absorption threshold used by the acceptance suite.

Runs the optimal device from U^R at the canonical parameters and reports the
share of paths absorbed into [0, U^I] at a few horizons.
"""

from __future__ import annotations

import argparse
import json
import time

from dynmed.model import derive, validate
from dynmed.simulate import simulate

CANON = {"p": 0.75, "q": 0.25, "g": 1, "b": -1, "w": 1, "r": 1, "delta": 0.9, "beta": 0.5}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--horizon", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args(argv)

    dq = derive(validate(CANON))
    t0 = time.perf_counter()
    stats, _ = simulate(dq, dq.U_R, horizon=args.horizon, n_paths=args.paths, seed=args.seed)
    marks = [h for h in (50, 100, 200, 500, 1000, 2000, args.horizon) if h <= args.horizon]
    out = {
        "paths": args.paths,
        "horizon": args.horizon,
        "seed": args.seed,
        "seconds": round(time.perf_counter() - t0, 2),
        "not_absorbed": stats.not_absorbed,
        "absorbed_fraction": {h: stats.absorbed_fraction(h) for h in marks},
        "median_absorption": stats.median_absorption(),
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
