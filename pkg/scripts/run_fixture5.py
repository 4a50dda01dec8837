"""End-to-end five-ball composer run: writes the forest, the config and every
CLI artifact into one directory, then the completeness table."""
import argparse
import sys
from pathlib import Path

from ballforest import cli
from ballforest.config import fixture_config
from ballforest.fixtures import five_ball_forest
from ballforest.serialize import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/fixture5"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mu-fraction", type=float, default=0.1)
    ap.add_argument("--J", type=int, default=3)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "fixture5_forest.json", five_ball_forest().to_dict())
    cfg = fixture_config()
    cfg["J"] = args.J
    cfg["options"]["mu_fraction"] = args.mu_fraction
    write_json(args.out / "fixture5.json", cfg)
    code = cli.main(["compose", "run", "--config", str(args.out / "fixture5.json"), "--seed", str(args.seed),
                     "--out", str(args.out)])
    if code == 0:
        code = cli.main(["report", "--config", str(args.out / "fixture5.json"), "--seq", str(args.out / "seq.json"),
                         "--out", str(args.out)])
    return code


if __name__ == "__main__":
    sys.exit(main())
