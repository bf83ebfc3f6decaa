"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 missing artifact.
"""

import argparse
import json
import sys

from .errors import ArchiveFormatError, ArtifactError, ConfigError, MagnitudeError
from .pipeline import (
    Paths,
    merge_config,
    stage_all,
    stage_calibrate,
    stage_eval_cross,
    stage_eval_perturb,
    stage_explain,
    stage_gen_data,
    stage_train_classifier,
    stage_train_detectors,
)

_STAGES = {
    "gen-data": stage_gen_data,
    "train-classifier": stage_train_classifier,
    "train-detectors": stage_train_detectors,
    "calibrate": stage_calibrate,
    "eval-cross": stage_eval_cross,
    "eval-perturb": stage_eval_perturb,
    "explain": stage_explain,
    "all": stage_all,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="particul-ood",
        description="Pattern-detector confidence measures and OoD benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(_STAGES) + ["print-config"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; defaults are built in")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", help="override the output directory")
    return parser


def load_config(args):
    user = {}
    if args.config:
        try:
            with open(args.config) as f:
                user = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = merge_config(user)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "print-config":
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        result = _STAGES[args.command](cfg, Paths(cfg["out"]))
        print(json.dumps({"command": args.command, "out": cfg["out"],
                          "result": result}, sort_keys=True))
        return 0
    except (ConfigError, MagnitudeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArtifactError, ArchiveFormatError) as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
