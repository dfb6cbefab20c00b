"""Throughput-region boundary of the 3-node path with node 0 silenced, for several T."""

import argparse
from pathlib import Path

from csma.experiments import pair_weight_grid, run_region
from csma.graph import gen_named
from csma.optimizer import weak_dominance_violations


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", default="2,4")
    ap.add_argument("--steps", type=int, default=21)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    Ts = [int(t) for t in args.T.split(",")]
    rep, pts = run_region(gen_named("path", 3), Ts, {0: 0.0}, pair_weight_grid(3, 1, 2, args.steps),
                          workers=args.workers)
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / "region.csv").write_text(rep.to_csv())
    print(rep.format_table())
    for a, b in zip(Ts, Ts[1:]):
        bad = weak_dominance_violations(pts[a], pts[b], (1, 2))
        print(f"T={a} points not dominated by T={b}: {len(bad)}")


if __name__ == "__main__":
    main()
