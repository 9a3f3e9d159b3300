"""Single-file HTML summary of a LOCO suite."""

import base64
import html
import logging
import math
import pathlib
import typing as ty
import warnings

from coreseg.core.evaluation import EvalReport, aggregate, format_mean_std
from coreseg.errors import MissingArtifactWarning
from coreseg.tools import write_text

logger = logging.getLogger(__name__)

PathLike = ty.Union[str, pathlib.Path]

STYLE = """
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; margin-bottom: 1.5em; }
th, td { border: 1px solid #999; padding: 0.3em 0.7em; text-align: right; }
th:first-child, td:first-child { text-align: left; }
tr.aggregate { font-weight: bold; background: #eee; }
tr.failed { color: #a00; }
figure { display: inline-block; margin: 0.5em; }
img { image-rendering: pixelated; max-width: 100%; }
"""

COLUMNS = ("Scenario", "Held out", "AUROC", "Closed acc.", "Open acc.",
           "Balanced acc.", "q", "tau", "Oracle q", "Status")


def _number(value: ty.Optional[float], digits: int = 3) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float) and math.isnan(value):
        return "n/a"
    return "{:.{}f}".format(value, digits)


def _row(report: EvalReport) -> ty.List[str]:
    status = report.status
    if report.error:
        status = "{}: {}".format(status, report.error)
    return [
        report.scenario,
        ", ".join(report.held_out),
        _number(report.auroc_unknown),
        _number(report.closed_accuracy),
        _number(report.open_accuracy),
        _number(report.balanced_accuracy),
        _number(report.q, 2),
        _number(report.tau, 5),
        _number(report.oracle_q, 2),
        status,
    ]


def _cells(values: ty.Sequence[str], tag: str = "td") -> str:
    return "".join("<{0}>{1}</{0}>".format(tag, html.escape(v))
                   for v in values)


def _image(path: pathlib.Path) -> str:
    data = base64.b64encode(path.read_bytes()).decode("ascii")
    return (
        '<figure><img src="data:image/png;base64,{}" alt="{}">'
        "<figcaption>{}</figcaption></figure>"
    ).format(data, html.escape(path.name), html.escape(path.name))


def emit_summary(
    path: PathLike,
    reports: ty.Sequence[EvalReport],
    renders: ty.Mapping[str, ty.Sequence[PathLike]],
    title: str = "LOCO summary",
) -> ty.List[pathlib.Path]:
    """Write a self-contained HTML summary and return missing renders.

    The table holds one row per scenario and an ``Avg.`` row with mean
    ± population standard deviation. Images are embedded as data URIs,
    so regenerating from unchanged inputs yields identical bytes. A
    missing render is listed in the document and warned about with
    :class:`MissingArtifactWarning`; generation continues.

    Parameters
    ----------
    path : str or Path
        Output ``.html`` file.
    reports : sequence of EvalReport
    renders : mapping
        Section name (usually a scenario) to image paths.
    title : str, optional
    """
    summary = aggregate(reports)
    body = ["<h1>{}</h1>".format(html.escape(title)), "<table>",
            "<tr>{}</tr>".format(_cells(COLUMNS, "th"))]
    for report in reports:
        css = ' class="failed"' if report.status != "ok" else ""
        body.append("<tr{}>{}</tr>".format(css, _cells(_row(report))))
    avg = ["Avg.", "", summary.auroc_text,
           format_mean_std(summary.closed_accuracy_mean,
                           summary.closed_accuracy_std),
           "", "", "", "", "",
           "{} failed".format(summary.n_failed)]
    body.append('<tr class="aggregate">{}</tr>'.format(_cells(avg)))
    body.append("</table>")
    missing: ty.List[pathlib.Path] = []
    for section, images in renders.items():
        body.append("<h2>{}</h2>".format(html.escape(section)))
        for image in images:
            image = pathlib.Path(image)
            if not image.is_file():
                warnings.warn(MissingArtifactWarning(str(image)))
                missing.append(image)
                continue
            body.append(_image(image))
    if missing:
        body.append("<h2>Missing artifacts</h2><ul>")
        body.extend("<li>{}</li>".format(html.escape(p.as_posix()))
                    for p in missing)
        body.append("</ul>")
    document = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        "<title>{}</title><style>{}</style></head><body>\n{}\n"
        "</body></html>\n"
    ).format(html.escape(title), STYLE, "\n".join(body))
    write_text(path, document)
    logger.info("Wrote summary %s (%d missing renders)", path, len(missing))
    return missing
