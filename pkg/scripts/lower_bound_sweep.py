"""Two-point certificates along n; reports where the pair first becomes valid."""

import argparse
import math

from _common import show

from deconv.config import emit_plotdata
from deconv.lower_bound import lower_bound_sweep
from deconv.models import SmoothnessClass, gaussian_noise


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kind", choices=["pointwise", "l2"], default="pointwise")
    p.add_argument("--c0", type=float, default=3.0)
    p.add_argument("--n", type=int, nargs="+", default=[10**4, 10**6, 10**8, 10**12])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv")
    args = p.parse_args()
    cls = SmoothnessClass(0.5, 1.0, 1 / math.pi)
    out = lower_bound_sweep(cls, gaussian_noise(1.0), args.n, args.kind, c0=args.c0, threads=args.threads)
    for rep in out["reports"]:
        if not rep["ok"]:
            print(f"n={rep['n']:.0e}: {rep['failed_stage']} failed: {rep['error']}")
    if out["rows"]:
        for row in out["rows"]:
            row["floor_over_rate"] = row["certified_floor"] / row["phi_n"]
        show(out["rows"], ["n", "separation", "n_chi2", "certified_floor", "phi_n", "floor_over_rate"])
        if args.csv:
            emit_plotdata(out["rows"], args.csv)
    print(f"smallest valid n: {out['smallest_valid_n']}")


if __name__ == "__main__":
    main()
