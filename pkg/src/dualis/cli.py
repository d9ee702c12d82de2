"""Command-line entry point: ``dualis --config experiment.json``.

Exit codes: 0 success, 2 invalid configuration, 3 enumeration size guard
exceeded, 4 I/O failure while writing outputs.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .oracle import SizeGuardError
from .runner import ConfigError, load_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIZE_GUARD = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualis",
        description=(
            "Estimate partition functions of ferromagnetic Ising/Potts lattice "
            "models by sampling on the dual factor graph."
        ),
    )
    parser.add_argument("--config", required=True, help="path to the JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--samples", type=int, default=None, help="override the sample count")
    parser.add_argument("--mode", default=None, help="override the sampler mode")
    parser.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.samples is not None:
            overrides["samples"] = args.samples
        if args.mode is not None:
            overrides["mode"] = args.mode
        if args.out is not None:
            overrides["out_dir"] = args.out
        if overrides:
            config = replace(config, **overrides).validate()
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE_GUARD
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    final = summary.get("final", {})
    value = final.get("per_site_log_Z", final.get("mean_per_site_log_Z"))
    if value is not None:
        print(f"per-site log Z: {value:.9g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
