"""Oracle h* against the class-free adaptive bandwidth on shared samples."""

from _common import parser

from deconv.models import SmoothnessClass
from deconv.montecarlo import ExperimentConfig, adaptive_comparison


def main():
    p = parser(__doc__)
    p.add_argument("--r", type=float, default=0.8)
    p.add_argument("--n", type=int, default=10**5)
    p.add_argument("--A", type=float, help="boundary-case constant, needed when r = 1")
    args = p.parse_args()
    params = {"A": args.A} if args.A is not None else {}
    cfg = ExperimentConfig(
        target={"kind": "cauchy", "scale": 1.0},
        noise={"kind": "gaussian", "sigma": 1.0},
        cls=SmoothnessClass(0.5, args.r, 1.0 if args.r < 1 else 1 / 3.141592653589793),
        n=args.n,
        replications=args.replications,
        rule_params=params,
        master_seed=args.seed,
    )
    out = adaptive_comparison(cfg, args.n, threads=args.threads)
    for name, h in out["bandwidths"].items():
        risk = out["risks"][name]
        print(f"{name:>18}  h={h:.5f}  l2={risk['l2']['value']:.4e}  x=0 mse={risk['pointwise'][0]['mse']:.4e}")
    print(f"l2 ratio {out['l2_ratio']:.3f}  pointwise ratio {out['pointwise_ratio']:.3f}")
    if "theoretical_inflation" in out:
        print(f"theoretical inflation {out['theoretical_inflation']:.4f}")
    else:
        print(f"checks {out['checks']}")


if __name__ == "__main__":
    main()
