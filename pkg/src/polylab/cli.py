"""Command line entry point: ``polylab simulate | summarize | verify-lemmas | print-config``.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when some
replicates or checks failed (the report lists them).
"""

import argparse
import json
import logging
import sys
import warnings

import yaml

from .exceptions import EmptyStore, InvalidConfig
from .experiments import (
    ExperimentConfig,
    OUTPUT_ROOT_ENV,
    dump_config,
    load_config,
    run,
    summarize,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PARTIAL = 3

# flag name -> dotted config key
FLAG_KEYS = {
    "experiment": "experiment",
    "d": "d",
    "functional": "functional",
    "replicates": "replicates",
    "seed": "seed",
    "workers": "workers",
    "output_dir": "output.dir",
    "mc_samples": "mc.samples",
}


def _add_config_flags(p):
    p.add_argument("--config", "-c", help="YAML file with dotted keys")
    p.add_argument("--experiment")
    p.add_argument("--d", type=int)
    p.add_argument("--functional")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any dotted key, e.g. --set grid.lam=[500,1000]",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="polylab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment and write its store")
    _add_config_flags(p)

    p = sub.add_parser("summarize", help="regenerate summary tables of a store")
    p.add_argument("store", help=f"store directory (relative paths resolve under ${OUTPUT_ROOT_ENV})")

    p = sub.add_parser("verify-lemmas", help="check the closed-form lemma identities")
    p.add_argument("--output-dir", dest="output_dir")

    p = sub.add_parser("print-config", help="print the resolved configuration with all defaults")
    _add_config_flags(p)
    return parser


def _overrides(args):
    out = {}
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    for item in args.set:
        if "=" not in item:
            raise InvalidConfig(item, "overrides must look like KEY=VALUE")
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def _report(result):
    report = {
        "store": str(result.store),
        "completed": result.completed,
        "skipped": result.skipped,
        "failures": result.failures,
    }
    print(json.dumps(report, indent=2))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "print-config":
            with warnings.catch_warnings():
                warnings.simplefilter("always")
                cfg = load_config(args.config, _overrides(args))
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if args.command == "simulate":
            cfg = load_config(args.config, _overrides(args))
            result = run(cfg)
            _report(result)
            return EXIT_OK if result.ok else EXIT_PARTIAL
        if args.command == "verify-lemmas":
            overrides = {"experiment": "verify-lemmas"}
            if args.output_dir:
                overrides["output.dir"] = args.output_dir
            result = run(load_config(None, overrides))
            _report(result)
            return EXIT_OK if result.ok else EXIT_PARTIAL
        if args.command == "summarize":
            cfg_dir = ExperimentConfig(output_dir=args.store).resolved_output_dir()
            summary = summarize(cfg_dir)
            print(json.dumps({"store": str(cfg_dir), "rows": len(summary.rows), "exponents": summary.exponents}, indent=2))
            return EXIT_OK
    except InvalidConfig as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EmptyStore as exc:
        print(f"empty store: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
