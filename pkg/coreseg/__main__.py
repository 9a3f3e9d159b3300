"""Command line entry point.

Run ``coreseg <command> --help`` (or ``python -m coreseg``) for the
options of each command. Exit codes: 0 success, 2 configuration error,
3 stage failure, 4 artifact chain mismatch.
"""

import argparse
import logging
import pathlib
import sys
import typing as ty

from coreseg.config import ExperimentConfig, load_config
from coreseg.core.data import generate_synthetic, save_scene, toy_scene_spec
from coreseg.core.evaluation import EvalReport, reports_to_csv
from coreseg.core.experiment import Pipeline, run_loco_suite, write_suite
from coreseg.errors import ArtifactChainError, ConfigError, StageError
from coreseg.tools import configure_logging

logger = logging.getLogger("coreseg")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE, EXIT_CHAIN = 0, 2, 3, 4

# Command -> last stage it runs.
STAGE_COMMANDS = {
    "train-closed": "backbone",
    "train-cae": "cae",
    "infer": "scores",
    "calibrate": "calibrate",
    "evaluate": "report",
}


def _common(parser: argparse.ArgumentParser, config_required: bool) -> None:
    parser.add_argument("--config", type=pathlib.Path,
                        required=config_required,
                        help="experiment .ini file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int,
                        help="random seed (overrides config)")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreseg",
        description="Open-set segmentation by conditional reconstruction.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    synth = commands.add_parser("synth-data",
                                help="write synthetic scenes to disk")
    _common(synth, config_required=False)
    synth.add_argument("--scenes", type=int,
                       help="number of scenes (overrides config)")
    for name, until in STAGE_COMMANDS.items():
        sub = commands.add_parser(
            name, help="run stages up to {}".format(until)
        )
        _common(sub, config_required=True)
        sub.add_argument("--scenario", action="append",
                         help="scenario name (repeatable, default all)")
        sub.add_argument("--resume", action="store_true",
                         help="reuse a valid artifact of this stage too")
    suite = commands.add_parser("run-suite",
                                help="run every LOCO scenario")
    _common(suite, config_required=True)
    suite.add_argument("--resume", action="store_true",
                       help="reuse valid stage artifacts")
    return parser


def synth_data(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = load_config(args.config, args.seed, args.out)
        dataset, seed = config.dataset, config.seed
    else:
        dataset = None
        seed = args.seed or 0
    out = pathlib.Path(args.out or "data/synthetic")
    count = args.scenes or (dataset.synthetic_scenes if dataset else 10)
    for i in range(count):
        spec = toy_scene_spec(
            seed * 100003 + i,
            size=dataset.synthetic_size if dataset else 128,
            grid=dataset.synthetic_grid if dataset else 4,
            noise=dataset.synthetic_noise if dataset else None,
            scene_id="toy{:04d}".format(i),
        )
        save_scene(out, generate_synthetic(spec),
                   [c.name for c in spec.classes])
    print("Wrote {} scenes to {}".format(count, out))
    return EXIT_OK


def _scenarios(config: ExperimentConfig,
               names: ty.Optional[ty.Sequence[str]]):
    if not names:
        return list(config.scenarios)
    return [config.scenario(name) for name in names]


def run_stages(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.out)
    until = STAGE_COMMANDS[args.command]
    pipeline = Pipeline(config, resume=True,
                        force=() if args.resume else (until, ))
    scenarios = _scenarios(config, args.scenario)
    reports: ty.List[EvalReport] = []
    for scenario in scenarios:
        result = pipeline.run(scenario, until)
        logger.info("%s finished for scenario %s", args.command,
                    scenario.name)
        if isinstance(result, EvalReport):
            reports.append(result)
    if reports:
        if len(scenarios) == len(config.scenarios):
            write_suite(config, pipeline, reports)
        sys.stdout.write(reports_to_csv(reports))
    return EXIT_OK


def run_suite(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.out)
    result = run_loco_suite(config, resume=args.resume)
    sys.stdout.write(reports_to_csv(result.reports))
    print("Summary: {}".format(result.summary))
    return EXIT_STAGE if result.failed else EXIT_OK


def main(argv: ty.Optional[ty.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "synth-data":
            return synth_data(args)
        if args.command == "run-suite":
            return run_suite(args)
        return run_stages(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except ArtifactChainError as e:
        logger.error("Artifact chain mismatch: %s", e)
        return EXIT_CHAIN
    except StageError as e:
        logger.error("%s", e)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
