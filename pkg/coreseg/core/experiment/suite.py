import dataclasses
import logging
import pathlib
import typing as ty

from coreseg.config import ExperimentConfig
from coreseg.core.evaluation import (Aggregate, EvalReport, aggregate,
                                     reports_to_csv, reports_to_json)
from coreseg.core.report import emit_summary, plot_roc
from coreseg.errors import ArtifactChainError, StageError
from coreseg.tools import write_text
from .pipeline import Pipeline

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class SuiteResult:
    reports: ty.Tuple[EvalReport, ...]
    aggregate: Aggregate
    summary: pathlib.Path

    @property
    def failed(self) -> ty.Tuple[EvalReport, ...]:
        return tuple(r for r in self.reports if r.status != "ok")


def run_scenario(
    config: ExperimentConfig,
    scenario: str,
    resume: bool = True,
    workers: ty.Optional[int] = None,
) -> EvalReport:
    """Run every stage of one LOCO scenario.

    Valid cached artifacts are reused when ``resume`` is set, so a
    rerun with an unchanged config skips both training stages.

    Raises
    ------
    ConfigError
        When ``scenario`` is not declared in the config.
    StageError
        When a stage fails; carries the stage name and the cause.
    ArtifactChainError
        When a cached artifact is linked to a different upstream.
    """
    pipeline = Pipeline(config, resume=resume, workers=workers)
    return pipeline.run(config.scenario(scenario))


def write_suite(
    config: ExperimentConfig,
    pipeline: Pipeline,
    reports: ty.Sequence[EvalReport],
) -> pathlib.Path:
    """Write suite tables, the combined ROC plot and the HTML summary."""
    output = config.output_dir
    write_text(output / "suite.csv", reports_to_csv(reports))
    write_text(output / "suite.json", reports_to_json(reports))
    renders: ty.Dict[str, ty.List[pathlib.Path]] = {}
    if pipeline.curves:
        renders["All scenarios"] = [
            plot_roc(output / "roc.png", pipeline.curves, config.name)
        ]
    for scenario in config.scenarios:
        renders[scenario.name] = pipeline.renders(scenario)
    summary = output / "summary.html"
    emit_summary(summary, reports, renders, "{} LOCO".format(config.name))
    return summary


def run_loco_suite(
    config: ExperimentConfig,
    resume: bool = True,
    workers: ty.Optional[int] = None,
) -> SuiteResult:
    """Run every declared scenario and aggregate their reports.

    A failing scenario is logged and reported with ``status="failed"``;
    the remaining scenarios still run.
    """
    pipeline = Pipeline(config, resume=resume, workers=workers)
    reports = []
    for scenario in config.scenarios:
        try:
            reports.append(pipeline.run(scenario))
        except (StageError, ArtifactChainError) as e:
            logger.error("Scenario %s failed: %s", scenario.name, e)
            reports.append(
                EvalReport.failed(scenario.name, scenario.held_out, str(e)))
    summary = write_suite(config, pipeline, reports)
    result = SuiteResult(tuple(reports), aggregate(reports), summary)
    logger.info("Suite %s: AUROC %s over %d scenarios (%d failed)",
                config.name, result.aggregate.auroc_text, len(reports),
                len(result.failed))
    return result
