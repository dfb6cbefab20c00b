"""Node-0 throughput on G(10, q) by simulation, both renewal formulas and the exact chain."""

import argparse
from pathlib import Path

from csma.experiments import run_table1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=2)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--p-mode", choices=["uniform", "random"], default="uniform")
    ap.add_argument("--slots", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    rep = run_table1(T=args.T, p_mode=args.p_mode, p_value=args.p, seed=args.seed,
                     slots=args.slots, workers=args.workers)
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / f"table1_T{args.T}.csv").write_text(rep.to_csv())
    print(rep.format_table())


if __name__ == "__main__":
    main()
