"""Hub and peripheral throughput on a 5-node star as the packet length grows."""

import argparse
from pathlib import Path

from csma.experiments import gnuplot_script, run_star_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--T", default="1,2,4,8,16")
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    rep = run_star_sweep(args.n, args.p, [int(t) for t in args.T.split(",")])
    args.outdir.mkdir(parents=True, exist_ok=True)
    csv = args.outdir / "star_sweep.csv"
    csv.write_text(rep.to_csv())
    ys = ["hub_exact", "hub_renewal_ext", "periph_exact", "periph_renewal_ext"]
    (args.outdir / "star_sweep.gp").write_text(gnuplot_script(str(csv), "T", ys, rep.columns, "star"))
    print(rep.format_table())


if __name__ == "__main__":
    main()
