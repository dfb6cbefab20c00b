"""Log-utility ascent on the 3-node path; writes the per-iteration trace."""

import argparse
from pathlib import Path

from csma.experiments import run_optimize
from csma.graph import gen_named
from csma.optimizer import OptimizerConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", default="0.6,0.6,0.3")
    ap.add_argument("--T", type=int, default=2)
    ap.add_argument("--grad-mode", default="finite-difference",
                    choices=["finite-difference", "analytic-T2-3node"])
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    opt = OptimizerConfig(tuple(float(a) for a in args.alpha.split(",")), grad_mode=args.grad_mode)
    rep, tr = run_optimize(gen_named("path", 3), args.T, opt, (0.5, 0.5, 0.5))
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / "convergence.csv").write_text(tr.to_csv())
    print(rep.format_table())


if __name__ == "__main__":
    main()
