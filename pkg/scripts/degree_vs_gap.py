"""Witness degree as the projected body E' = disk(-g - R, R) approaches the
segment D' = [-i, i]."""
import argparse

import numpy as np

from ballforest.runge import PlanarConvex, WitnessError, runge_witness
from ballforest.serialize import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau", type=float, default=0.1)
    ap.add_argument("--radius", type=float, default=0.5)
    ap.add_argument("--cap", type=int, default=512)
    ap.add_argument("--out", default="out/degree_vs_gap.csv")
    args = ap.parse_args()

    rows = []
    for gap in [2.0, 1.5, 1.0, 0.75, 0.5, 0.35, 0.25, 0.15, 0.1]:
        E = PlanarConvex.disk(-gap - args.radius, args.radius)
        try:
            w = runge_witness(1.0, E, args.tau, degree_cap=args.cap)
            rows.append([gap, w.degree, w.marginE, w.marginD])
        except WitnessError as err:
            best = max(err.best[1:], key=lambda h: min(h[1], h[2]))
            rows.append([gap, -1, best[1], best[2]])
        print(f"gap {gap:5.2f}: degree {rows[-1][1]:4d}  marginE {rows[-1][2]:.3g}  marginD {rows[-1][3]:.3g}")
    degs = [r[1] for r in rows if r[1] >= 0]
    print("monotone in gap:", all(a <= b for a, b in zip(degs, degs[1:])))
    write_csv(args.out, ["gap", "degree", "marginE", "marginD"], rows)


if __name__ == "__main__":
    np.seterr(over="ignore")
    main()
