"""Train on the built-in synthetic corpus and watch the losses move.

Runs a shortened overfit10 session (the full 200-step profile takes about 20
minutes on one CPU core; pass --steps 200 to reproduce it).  The run writes
losses.csv plus a checkpoint that the later demos load.
"""

import argparse
import csv
from pathlib import Path

from covergen.cli import main as covergen_main

OUT = Path(__file__).parent / "out" / "train"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=40)
    args = ap.parse_args()

    code = covergen_main(
        ["train", "--profile", "overfit10", "--steps", str(args.steps), "--out", str(OUT)]
    )
    if code != 0:
        raise SystemExit(code)

    with open(OUT / "losses.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    first, last = rows[0], rows[-1]
    print(f"\n{len(rows)} steps logged; pixel {float(first['pixel']):.3f} -> "
          f"{float(last['pixel']):.3f}, box {float(first['box']):.3f} -> "
          f"{float(last['box']):.3f}")
    print("checkpoint at", OUT / "checkpoint")


if __name__ == "__main__":
    main()
