"""Fixed-density risk over the class rate for a target strictly inside the class."""

import math

from _common import parser, show

from deconv.config import emit_plotdata
from deconv.models import SmoothnessClass
from deconv.montecarlo import ExperimentConfig, superefficiency_demo


def main():
    p = parser(__doc__)
    p.add_argument("--inflate", type=float, default=4.0, help="L as a multiple of the target's own energy")
    p.add_argument("--n", type=int, nargs="+", default=[10**3, 10**4, 10**5])
    args = p.parse_args()
    cfg = ExperimentConfig(
        target={"kind": "cauchy", "scale": 1.0},
        noise={"kind": "gaussian", "sigma": 1.0},
        cls=SmoothnessClass(0.5, 1.0, args.inflate / math.pi),
        n=args.n[0],
        replications=args.replications,
        master_seed=args.seed,
    )
    out = superefficiency_demo(cfg, args.n, threads=args.threads)
    show(out["rows"], ["n", "h", "risk", "rate", "ratio", "ratio_se"])
    print(f"energy margin {out['energy_margin']:.4g}  checks {out['checks']}")
    if args.csv:
        emit_plotdata(out["rows"], args.csv)


if __name__ == "__main__":
    main()
