"""``spo-mix`` command line: gen, estimate, sweep, oracle.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import cp_als, joint_tensor
from .domain import read_csv, write_csv
from .errors import ConfigError, OutOfRange, SpoError
from .experiment import ExperimentConfig, emit, sweep
from .moments import condition_diagnostic, estimate_bundle
from .spo import ate, ate_via_pseudoinverse, recover_mte, response_moment_sequence
from .synthetic import appendix_model, exact_bundle, exact_ground_truth, paper_model, sample

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _spec(args):
    if args.model == "paper":
        return paper_model(args.mu_zt, args.mu_xy)
    return appendix_model()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _print(doc) -> None:
    print(json.dumps(doc, indent=2, default=_json_default))


def cmd_gen(args) -> int:
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    d = sample(_spec(args), args.n, args.seed)
    write_csv(d, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        d = read_csv(args.input)
    except SpoError as exc:
        raise ConfigError(f"{args.input}: {exc}") from exc
    out: dict = {"n": d.n, "level": args.level, "k": args.k}
    try:
        if args.level == 2:
            fac = cp_als(joint_tensor(d), args.k, restarts=args.restarts, seed=args.seed)
            out["mixture"] = {
                "weights": fac.weights,
                "f_z": fac.f_z,
                "f_x": fac.f_x,
                "f_s": fac.f_s,
                "residual": fac.residual,
                "converged": fac.converged,
            }
        else:
            bundle = estimate_bundle(d)
            if args.dump_moments is not None:
                text = bundle.to_json(indent=2)
                if args.dump_moments == "-":
                    out["moments"] = json.loads(text)
                else:
                    Path(args.dump_moments).write_text(text)
            out["condition"] = [asdict(a) for a in condition_diagnostic(bundle)]
            out["ate"] = ate(bundle)
            if args.level == 3:
                mix, diag = recover_mte(bundle, args.k, method=args.method)
                out["mte"] = mix.to_dict()
                out["pencil"] = asdict(diag) if diag is not None else None
    except (SpoError, np.linalg.LinAlgError) as exc:
        out["error"] = type(exc).__name__
        out["message"] = str(exc)
        _print(out)
        return 1
    _print(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.output is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "output": args.output})
    result = sweep(config)
    csv_path, json_path = emit(result)
    print(f"wrote {csv_path} and {json_path}")
    for metric, value in result.grand_mean.items():
        print(f"grand mean {metric}: {value:.6g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = _spec(args)
    truth = exact_ground_truth(spec)
    bundle = exact_bundle(spec, truth)
    out = {
        "model": spec.name,
        "truth": {"ate": truth.ate, "mte": truth.mte.to_dict()},
        "moments": json.loads(bundle.to_json()),
    }
    spo: dict = {}
    try:
        spo["ate"] = ate(bundle)
        spo["ate_pseudoinverse"] = ate_via_pseudoinverse(bundle)
        spo["sequence"] = response_moment_sequence(bundle, args.k).values
        mix, diag = recover_mte(bundle, args.k)
        spo["mte"] = mix.to_dict()
        spo["pencil"] = asdict(diag)
    except (SpoError, np.linalg.LinAlgError) as exc:
        spo["error"] = type(exc).__name__
    out["spo"] = spo
    _print(out)
    return EXIT_OK


def _unit(text: str) -> float:
    v = float(text)
    if not (0.0 <= v <= 1.0) or math.isnan(v):
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spo-mix", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--model", choices=("paper", "appendix1", "appendix2"), default="paper")
        sp.add_argument("--mu-zt", type=_unit, default=0.0)
        sp.add_argument("--mu-xy", type=_unit, default=0.0)

    g = sub.add_parser("gen", help="sample a synthetic dataset to CSV")
    model_args(g)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("estimate", help="estimate effects from a dataset CSV")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--level", type=int, choices=(2, 3, 4), default=4)
    e.add_argument("--k", type=int, default=2)
    e.add_argument("--method", choices=("pencil", "prony"), default="pencil")
    e.add_argument("--restarts", type=int, default=10)
    e.add_argument("--seed", type=int, default=0, help="ALS initialization seed (level 2)")
    e.add_argument(
        "--dump-moments",
        nargs="?",
        const="-",
        default=None,
        metavar="PATH",
        help="write the moment bundle as JSON to PATH (inline in the output if omitted)",
    )
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="run a configured parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--output", default=None, help="override the config's output directory")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="exact ground truth and exact-moment SPO outputs")
    model_args(o)
    o.add_argument("--k", type=int, default=2)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OutOfRange) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
