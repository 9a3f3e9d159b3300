import io
import pathlib
import typing as ty

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from coreseg.core.evaluation import RocCurve
from coreseg.tools import write_bytes


def roc_figure(curves: ty.Mapping[str, RocCurve],
               title: str = "") -> Figure:
    """One ROC line per scenario plus the chance diagonal."""
    figure = Figure(figsize=(5, 5), dpi=100)
    FigureCanvasAgg(figure)
    ax = figure.add_subplot(1, 1, 1)
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1)
    for name, curve in curves.items():
        ax.plot(curve.fpr, curve.tpr, linewidth=1.5,
                label="{} (AUROC {:.3f})".format(name, curve.auroc))
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("False positive rate (known flagged unknown)")
    ax.set_ylabel("True positive rate (unknown detected)")
    if title:
        ax.set_title(title)
    if curves:
        ax.legend(loc="lower right", fontsize="small")
    figure.tight_layout()
    return figure


def plot_roc(path: ty.Union[str, pathlib.Path],
             curves: ty.Mapping[str, RocCurve],
             title: str = "") -> pathlib.Path:
    """Write the ROC plot as a PNG."""
    buffer = io.BytesIO()
    roc_figure(curves, title).savefig(buffer, format="png",
                                      metadata={"Software": None})
    path = pathlib.Path(path)
    write_bytes(path, buffer.getvalue())
    return path
