"""Cell counts against |B| for a few formulas; writes one CSV per formula."""

import argparse
import csv
import os
import random
import time

from sparsedistal import predicate as P
from sparsedistal.formula import Context, parse
from sparsedistal.shd import decompose

FORMULAS = {
    "order": ("(< (+ x y) 5)", ("y",)),
    "member": ("(in (+ x y))", ("y",)),
    "pdelta": ("(< (P 1 2 (1 2 4) (- x y)) (+ y 1000))", ("y",)),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="sweep_out")
    ap.add_argument("--sizes", default="1,2,4,8,16,32,64")
    ap.add_argument("--window", type=int, nargs=2, default=(-2000, 2000))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    pred = P.power(2)
    sizes = [int(s) for s in args.sizes.split(",")]
    for name, (text, params) in FORMULAS.items():
        phi = parse(text, Context(pred))
        rng = random.Random(args.seed)
        path = os.path.join(args.out, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["size", "cells", "bound", "seconds"])
            for size in sizes:
                B = [tuple(rng.randint(-1000, 1000) for _ in params) for _ in range(size)]
                t0 = time.perf_counter()
                dec = decompose(phi, params, B, tuple(args.window))
                w.writerow([size, len(dec.cells), dec.bound, f"{time.perf_counter() - t0:.3f}"])
        print(path)


if __name__ == "__main__":
    main()
