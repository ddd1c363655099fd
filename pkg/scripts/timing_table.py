"""Wall-clock table: naive vs. rank-one-update pruning.

Thin wrapper over the timing harness; naive and fast runs must agree on the
final subspace before any time is reported.
"""
import argparse

from koopman_prune.bench import MODES, timing_harness, write_timing_csv


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", default="53,128")
    p.add_argument("--modes", default=",".join(MODES))
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default="timing.csv")
    args = p.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = timing_harness(sizes, args.modes.split(","), repeats=args.repeats)
    write_timing_csv(args.out, rows)
    first = {r.dim: r.first_svd_seconds for r in rows}
    for dim in sizes:
        print(f"s = {dim}  (first principal-argument computation {first[dim]:.3f} s)")
        for r in rows:
            if r.dim == dim:
                print(f"  {r.mode:12s} {r.wall_seconds:9.3f} s   final dim {r.final_dim}")


if __name__ == "__main__":
    main()
