"""Command-line entry point: ``deconv <subcommand> --config cfg.json``.

Exit codes: 0 success, 1 invalid input (the message names the field),
2 numerical failure (the message names the stage).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import Optional, Sequence

from . import bandwidth as bw
from .config import (
    ConfigError,
    class_from_config,
    emit_plotdata,
    grid_from_config,
    load_config,
    noise_from_config,
    read_samples,
    write_json,
)
from .estimator import EstimatorOverflowError, estimate_density
from .fourier_grid import ContractError, Grid, QuadratureError
from .lower_bound import DEFAULTS, DEFAULT_C0, lower_bound_certificate, lower_bound_sweep
from .montecarlo import ExperimentConfig, rate_sweep, run_experiment
from .risk_bounds import DEFAULT_SLACK, BiasDominationError, assemble_report

__all__ = ["main", "build_parser"]

log = logging.getLogger("deconv")

SUBCOMMANDS = ("bandwidth", "estimate", "bounds", "lowerbound", "simulate", "rates", "selftest")


class NumericalFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deconv", description="Sharp-minimax density deconvolution toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--output", help="output path (stdout when omitted)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--threads", type=int, help="worker threads (env DECONV_THREADS)")
    common.add_argument("--slack", type=float, default=DEFAULT_SLACK, help="multiplicative slack for asymptotic bounds")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true")
    verbosity.add_argument("--debug", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "estimate":
            p.add_argument("--samples", help="one-column CSV of observations")
        if name in ("lowerbound", "simulate"):
            p.add_argument("--sweep", help="CSV path for the sweep table over n_list")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        raw = os.environ.get("DECONV_THREADS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"DECONV_THREADS: not an integer: {raw!r}")
    if value < 1:
        raise ConfigError(f"threads: must be >= 1, got {value}")
    return value


def _config(args) -> dict:
    if not args.config:
        raise ConfigError("--config: required for this subcommand")
    return load_config(args.config, args.subcommand)


def cmd_bandwidth(args, config) -> None:
    cls, noise, n = class_from_config(config), noise_from_config(config), config["n"]
    equation = config.get("equation", "HSTAR")
    if equation == "HSTAR":
        result = bw.solve_hstar(cls, noise, n)
    elif equation == "HPLUS":
        result = bw.solve_hplus(cls, noise, n)
    elif equation == "ADAPTIVE":
        result = bw.adaptive_bandwidth(noise, n)
    else:
        params = config.get("bandwidth", {})
        if "A" not in params:
            raise ConfigError("bandwidth.A: required for ADAPTIVE_CRITICAL")
        result = bw.adaptive_bandwidth_critical(noise, n, params["A"], params.get("alpha0", cls.alpha))
    out = result.to_dict()
    pointwise, l2 = bw.rates_at(cls, result.h)
    out["rates"] = {"pointwise": pointwise, "l2": l2}
    write_json(out, args.output)


def cmd_rates(args, config) -> None:
    cls, noise = class_from_config(config), noise_from_config(config)
    n_list = config.get("n_list") or ([config["n"]] if "n" in config else None)
    if not n_list:
        raise ConfigError("n: rates needs n or n_list")
    rows = []
    for n in n_list:
        rate = bw.rates(cls, noise, n)
        rows.append({"n": n, **rate.to_dict()})
    write_json({"rows": rows}, args.output)


def cmd_bounds(args, config) -> None:
    cls, noise = class_from_config(config), noise_from_config(config)
    report = assemble_report(cls, noise, config["n"], config.get("h"), config.get("loss", "l2"))
    out = report.to_dict()
    out["slack"] = args.slack
    out["total_with_slack"] = report.total_bound * args.slack
    write_json(out, args.output)


def cmd_estimate(args, config) -> None:
    noise = noise_from_config(config)
    path = args.samples or config.get("samples")
    if not path:
        raise ConfigError("samples: give --samples or a 'samples' path in the config")
    samples = read_samples(path)
    if "h" in config:
        h = config["h"]
    elif "class" in config:
        h = bw.solve_hstar(class_from_config(config), noise, len(samples)).h
    else:
        raise ConfigError("h: give h or a class to solve h* at n = number of samples")
    grid = grid_from_config(config, Grid(2**12, 256.0))
    est = estimate_density(samples, noise, h, grid)
    table = [{"x": float(x), "f_hat": float(v)} for x, v in zip(grid.x, est.values.real)]
    emit_plotdata(table, args.output, ["x", "f_hat"])


def _experiment(config, seed: Optional[int], n: int) -> ExperimentConfig:
    rule = config.get("bandwidth", {"rule": "HSTAR"})
    grid = config.get("grid", {})
    return ExperimentConfig(
        target=config["target"],
        noise=config["noise"],
        cls=class_from_config(config),
        n=int(n),
        replications=int(config.get("replications", 100)),
        bandwidth_rule=rule["rule"],
        rule_params={k: v for k, v in rule.items() if k != "rule"},
        eval_points=tuple(config.get("eval_points", [0.0])),
        master_seed=int(seed if seed is not None else config.get("master_seed", 0)),
        grid_points=int(grid.get("n_points", 2**12)),
        grid_half_width=float(grid.get("x_max", 256.0)),
    )


def cmd_simulate(args, config) -> None:
    threads = _threads(args)
    n_list = config.get("n_list")
    n = config.get("n", n_list[0] if n_list else None)
    if n is None:
        raise ConfigError("n: simulate needs n or n_list")
    experiment = _experiment(config, args.seed, n)
    risk = run_experiment(experiment, threads)
    write_json({"config": experiment.to_dict(), "risk": risk.to_dict()}, args.output)
    if args.sweep:
        if not n_list:
            raise ConfigError("n_list: required with --sweep")
        table = rate_sweep(experiment, n_list, threads=threads)["rows"]
        emit_plotdata(table, args.sweep, ["n", "risk", "rate", "ratio", "mc_se"])


def cmd_lowerbound(args, config) -> None:
    cls, noise = class_from_config(config), noise_from_config(config)
    lb = config.get("lower_bound", {})
    kind = lb.get("kind", "pointwise")
    delta = lb.get("delta", DEFAULTS[kind]["delta"])
    D = lb.get("D", DEFAULTS[kind]["D"])
    c0 = lb.get("c0", DEFAULT_C0)
    slack = args.slack if args.slack != DEFAULT_SLACK else 0.2
    if args.sweep:
        n_list = config.get("n_list")
        if not n_list:
            raise ConfigError("n_list: required with --sweep")
        sweep = lower_bound_sweep(cls, noise, n_list, kind, delta, D, c0, threads=_threads(args))
        if not sweep["rows"]:
            raise NumericalFailure("lowerbound.build_pair", "no n in n_list produced a valid pair")
        emit_plotdata(sweep["rows"], args.sweep, ["n", "separation", "n_chi2", "certified_floor", "phi_n"])
        write_json(sweep, args.output)
        return
    if "n" not in config:
        raise ConfigError("n: required for a single certificate")
    write_json(lower_bound_certificate(cls, noise, config["n"], kind, delta, D, c0, slack), args.output)


def selftest_checks() -> list:
    """Cheap identity checks of the library; each item is (name, passed)."""
    import numpy as np

    from .estimator import build_kernel, variance_functional_l2
    from .fourier_grid import SPACE, GriddedFunction, forward_transform, inverse_transform
    from .lower_bound import build_phi_g, two_point_risk_bound
    from .models import gaussian_noise

    grid = Grid(2**10, 16.0)
    zero = GriddedFunction(grid, np.zeros(grid.n_points), SPACE)
    g = grid.sample(lambda x: np.exp(-x * x / 2))
    noise = gaussian_noise(1.0)
    kernel = build_kernel(noise, 0.5)
    at0 = kernel.phi_k.values[kernel.grid.n_points // 2]
    phig = build_phi_g(0.5, 4.0)
    return [
        ("transform of zero is zero", bool(np.all(forward_transform(zero).values == 0))),
        ("round trip", bool(np.max(np.abs(inverse_transform(forward_transform(g)).values - g.values)) < 1e-12)),
        ("kernel cf is 1 at the origin", abs(at0 - 1) < 1e-15),
        ("kernel cf vanishes beyond the cut", bool(np.all(kernel.phi_k.values[np.abs(kernel.grid.u) > 1] == 0))),
        ("halving n doubles the variance functional",
         math.isclose(variance_functional_l2(noise, 0.5, 500), 2 * variance_functional_l2(noise, 0.5, 1000), rel_tol=1e-14)),
        ("two-point bound at (1, 0.25)", two_point_risk_bound(1.0, 0.25) == 0.375),
        ("smoothed indicator equals 1 at 2", float(phig(2.0)) == 1.0),
        ("smoothed indicator vanishes at 0", float(phig(0.0)) == 0.0),
    ]


def cmd_selftest(args, config) -> int:
    failures = 0
    for name, ok in selftest_checks():
        failures += not ok
        if not args.quiet:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if failures == 0 else 2


HANDLERS = {
    "bandwidth": cmd_bandwidth,
    "rates": cmd_rates,
    "bounds": cmd_bounds,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "lowerbound": cmd_lowerbound,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.debug else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.subcommand == "selftest":
            return cmd_selftest(args, None)
        config = _config(args)
        HANDLERS[args.subcommand](args, config)
    except (EstimatorOverflowError, QuadratureError, BiasDominationError) as exc:
        print(f"error: numerical failure in {args.subcommand} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"error: numerical failure in {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ContractError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: numerical failure in {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
