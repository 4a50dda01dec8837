"""Delete each net family of the (0.5, 0.8) shell forest in turn and rerun the
crossing oracle against two claims: the Euclidean shell bound and the intact
forest's measured projected length."""
import argparse
import time

from ballforest.forest import build_shell_forest, shell_bound
from ballforest.path_oracle import CrossingProblem, falsify_bound
from ballforest.serialize import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.002)
    ap.add_argument("--out", default="out/mutation_sweep.csv")
    args = ap.parse_args()

    forest = build_shell_forest(1, 0.5, 0.8)
    bound = shell_bound(1, 0.5, 0.8, euclidean=True)
    intact = falsify_bound(CrossingProblem(forest, 0.5, 0.8, args.h, "projected"), 0.0)[1].length
    print(f"intact projected crossing {intact:.5f}, euclidean bound {bound:.5f}")
    rows = []
    for fam in range(0, 11):
        f = forest if fam == 0 else forest.without_family(fam)
        t0 = time.perf_counter()
        ve, re = falsify_bound(CrossingProblem(f, 0.5, 0.8, args.h, "euclidean"), bound)
        vp, rp = falsify_bound(CrossingProblem(f, 0.5, 0.8, args.h, "projected"), intact)
        rows.append([fam, len(f), re.length, ve.verdict, rp.length, vp.verdict])
        print(f"family {fam:2d} dropped: balls {len(f):3d}  euclid {re.length:.5f} ({ve.verdict})  "
              f"projected {rp.length:.5f} ({vp.verdict})  {time.perf_counter() - t0:.1f}s")
    write_csv(args.out, ["dropped_family", "balls", "euclidean", "verdict_vs_bound", "projected",
                         "verdict_vs_intact"], rows)


if __name__ == "__main__":
    main()
