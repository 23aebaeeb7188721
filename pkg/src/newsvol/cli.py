"""Command-line entry point: ``newsvol {ingest,features,evaluate,mcnemar,explain,all,synth}``."""

import argparse
import logging
import os
import sys

from filelock import FileLock, Timeout

from . import pipeline, synthetic
from .config import RunConfig
from .errors import ConfigError, DependencyError, NewsVolError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DEPENDENCY = 4

logger = logging.getLogger("newsvol")


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DependencyError):
        return EXIT_DEPENDENCY
    return EXIT_DATA


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML run configuration")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one setting, e.g. --set ensemble.k=7 (repeatable)")
    common.add_argument("-o", "--output-dir", help="artifact directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--lags", type=int)
    common.add_argument("--channels", help="comma-separated news channels")
    common.add_argument("--n-jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="newsvol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in pipeline.ORDER + ("all",):
        sub.add_parser(name, parents=[common], help=f"run the {name} stage" if name != "all" else "run every stage")
    synth = sub.add_parser("synth", help="write the synthetic fixture and its config")
    synth.add_argument("out_dir")
    synth.add_argument("--days", type=int, default=600)
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("-v", "--verbose", action="store_true")
    return parser


def _flag_values(args):
    flags = {"paths.output_dir": None, "seed": args.seed, "lags": args.lags, "n_jobs": args.n_jobs}
    if args.output_dir is not None:
        flags["paths.output_dir"] = os.path.abspath(args.output_dir)
    if args.channels is not None:
        flags["channels"] = [c.strip() for c in args.channels.split(",") if c.strip()]
    return flags


def run(cfg, command):
    """Run one stage (or all of them) under the output-directory lock and refresh the manifest."""
    ws = pipeline.Workspace(cfg)
    lock = FileLock(ws.path(pipeline.LOCK), timeout=0)
    try:
        lock.acquire()
    except Timeout:
        raise ConfigError(f"output directory {ws.root} is locked by another run") from None
    try:
        stages = pipeline.ORDER if command == "all" else (command,)
        for name in stages:
            logger.info("stage %s", name)
            pipeline.STAGES[name](cfg, ws)
        ws.write_manifest()
    finally:
        lock.release()
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            fx = synthetic.generate(args.out_dir, n_days=args.days, seed=args.seed)
            print(fx.config_path)
            return EXIT_OK
        cfg = RunConfig.load(args.config, args.overrides, _flag_values(args))
        return run(cfg, args.command)
    except NewsVolError as exc:
        print(f"newsvol: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"newsvol: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
