from .palette import DEFAULT_COLOURS, Palette
from .render import (decode_colors, encode_png, false_colour,
                     heatmap_positions, qualitative_panel, ramp_lut,
                     render_error_heatmap, render_prediction, save_png)
from .plots import plot_roc, roc_figure
from .summary import emit_summary

__all__ = [
    "DEFAULT_COLOURS", "Palette", "decode_colors", "encode_png",
    "false_colour", "heatmap_positions", "qualitative_panel", "ramp_lut",
    "render_error_heatmap", "render_prediction", "save_png", "plot_roc",
    "roc_figure", "emit_summary"
]
