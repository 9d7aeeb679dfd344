"""Empirical l2 risk against the class rate along n, with the log-risk slope."""

import math

from _common import parser, show

from deconv.config import emit_plotdata
from deconv.models import SmoothnessClass
from deconv.montecarlo import ExperimentConfig, rate_sweep


def main():
    p = parser(__doc__)
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--n", type=int, nargs="+", default=[10**3, 10**4, 10**5, 10**6])
    args = p.parse_args()
    if not 0 < args.alpha < 1:
        p.error("alpha must lie in (0, 1) for a Cauchy target")
    # a Cauchy(1) target has weighted energy 1/(1 - alpha); put L just above it
    L = 1.0001 / ((1.0 - args.alpha) * 2 * math.pi)
    cfg = ExperimentConfig(
        target={"kind": "cauchy", "scale": 1.0},
        noise={"kind": "gaussian", "sigma": 1.0},
        cls=SmoothnessClass(args.alpha, 1.0, L),
        n=args.n[0],
        replications=args.replications,
        master_seed=args.seed,
    )
    out = rate_sweep(cfg, args.n, threads=args.threads)
    show(out["rows"], ["n", "h", "risk", "rate", "ratio", "mc_se"])
    print(f"slope {out['slope']:.3f}  checks {out['checks']}")
    if args.csv:
        emit_plotdata(out["rows"], args.csv)


if __name__ == "__main__":
    main()
