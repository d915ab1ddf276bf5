"""Command line entry point: ``solve``, ``bench`` and ``check``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, checks
from .mesh import build_mesh
from .numop import NumOpConfig, check_consistency, check_gmonotonicity
from .problems import make_example, poisson
from .space import DgSpace
from .system import DiscreteSystem

log = logging.getLogger("nsldg")

SUITES = ("consistency", "monotone", "fd-equiv", "jumps")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", help="directory for tables and field dumps")
    p.add_argument("--seed", type=int, help="random seed for property suites")
    p.add_argument("--format", dest="field_format", choices=bench.FIELD_FORMATS, help="field dump format")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsldg", description="LDG solver for fully nonlinear 2D PDEs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run one configuration file")
    p.add_argument("--config", required=True, type=Path)
    _add_common(p)
    p = sub.add_parser("bench", help="reproduce a shipped benchmark table")
    p.add_argument("--preset", help="preset name; omit with --list")
    p.add_argument("--list", action="store_true", help="list available presets")
    _add_common(p)
    p = sub.add_parser("check", help="run a property suite")
    p.add_argument("--suite", required=True, choices=SUITES)
    _add_common(p)
    return parser


def _run(cfg: bench.RunConfig, args) -> int:
    cfg = bench.with_overrides(cfg, out_dir=args.out_dir, seed=args.seed, field_format=args.field_format)
    result = bench.run_experiment(cfg)
    print(f"# {cfg.name}")
    print(bench.format_table(result))
    return 0 if result.all_converged else 1


def _suite_consistency(seed: int) -> bool:
    ok = True
    problems = [(name, make_example(int(name[-1])), cfg) for name, cfg in checks.shipped_configs()]
    problems.append(("poisson", poisson(lambda x, y, t: 0 * x), NumOpConfig.scaled_identity(1.0, beta=0.5)))
    for name, prob, cfg in problems:
        rep = check_consistency(cfg, prob, samples=10_000, seed=seed)
        print(f"consistency {name:10s} max deviation {rep.max_deviation:.2e}  {'PASS' if rep.passed else 'FAIL'}")
        ok &= rep.passed
    return ok


def _suite_monotone(seed: int) -> bool:
    lap = poisson(lambda x, y, t: 0 * x)
    ex1 = make_example(1)
    hess_box = checks.EXACT_HESSIAN_BOX_EX1
    cases = [
        ("-laplace alpha=I", lap, NumOpConfig.scaled_identity(1.0), {}, True, "entrywise"),
        ("monge-ampere alpha=24I", ex1, NumOpConfig.scaled_identity(24.0), hess_box, True, "entrywise"),
        ("monge-ampere alpha=24I", ex1, NumOpConfig.scaled_identity(24.0), hess_box, True, "loewner"),
        ("monge-ampere alpha=0", ex1, NumOpConfig(), hess_box, False, "entrywise"),
    ]
    ok = True
    for label, prob, cfg, box, expect_monotone, mode in cases:
        rep = check_gmonotonicity(cfg, prob, box=box, samples=2000, seed=seed, mode=mode)
        good = rep.passed == expect_monotone
        want = "no violations" if expect_monotone else "violations"
        print(f"monotone {label:24s} [{mode:9s}] violations {rep.total_violations:6d} (want {want})  "
              f"{'PASS' if good else 'FAIL'}")
        if not rep.passed:
            worst = sorted(((v, k) for k, v in rep.violations.items() if v), reverse=True)[:4]
            print("    " + ", ".join(f"{k}: {v}" for v, k in worst))
        ok &= good
    return ok


def _suite_fd(seed: int) -> bool:
    rep = checks.fd_equivalence_check(seed=seed)
    tol = {"gradient": 1e-12, "laplacian": 1e-10, "moment": 1e-10, "mixed_diag": 1e-10}
    ok = True
    for key, value in rep.as_dict().items():
        if key in tol:
            good = value <= tol[key]
            ok &= good
            print(f"fd-equiv {key:20s} {value:.2e}  {'PASS' if good else 'FAIL'}")
        else:
            print(f"fd-equiv {key:20s} {value:.2e}  (opposite sign convention, informational)")
    return ok


def _suite_jumps(seed: int) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    for name, cfg in checks.shipped_configs():
        prob = make_example(int(name[-1]))
        space = DgSpace(build_mesh(prob.domain, 4, 4), 1)
        u = rng.standard_normal(space.ndofs)
        jr = checks.jump_identity_check(space, u).worst
        cfg = NumOpConfig(cfg.alpha + np.array([[0, 0.5], [0.25, 0]]), np.array([0.3, 0.7]))
        system = DiscreteSystem(prob, space, cfg, t=0.5 if prob.parabolic else 0.0)
        rw = checks.rewritten_residual(system, u)
        good = jr <= 1e-11 and rw <= 1e-11
        ok &= good
        print(f"jumps {name:10s} identities {jr:.2e} rewrite {rw:.2e}  {'PASS' if good else 'FAIL'}")
    return ok


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return _run(bench.load_config(args.config), args)
        if args.command == "bench":
            if args.list or not args.preset:
                print("\n".join(bench.preset_names()))
                return 0 if args.list else 2
            return _run(bench.load_preset(args.preset), args)
        seed = 0 if args.seed is None else args.seed
        suite = {"consistency": _suite_consistency, "monotone": _suite_monotone,
                 "fd-equiv": _suite_fd, "jumps": _suite_jumps}[args.suite]
        return 0 if suite(seed) else 1
    except (bench.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
