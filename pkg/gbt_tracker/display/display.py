from __future__ import annotations

import logging
import os
from typing import Any, Dict, Optional

import plotly.graph_objects as go

logger = logging.getLogger(__name__)


def create_default_display(title: str = "") -> go.Figure:
    """Empty fallback figure."""
    fig = go.Figure()
    fig.update_layout(**base_layout(title))
    fig.add_annotation(
        x=0.5, y=0.5,
        xref="paper", yref="paper",
        text="No records to plot",
        showarrow=False,
        font=dict(size=16, color="gray"),
    )
    return fig


# -------------------------------------------------
# Color utilities
# -------------------------------------------------
_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
]

TARGET_COLOR = "#d62728"
AUV_COLOR = "#1f77b4"
BOUND_COLOR = "#7f7f7f"


def color_for_label(label: str) -> str:
    if not label:
        return _PALETTE[0]
    h = 0
    for ch in str(label):
        h = (h * 31 + ord(ch)) & 0xFFFFFFFF
    return _PALETTE[h % len(_PALETTE)]


# -------------------------------------------------
# Layout and export
# -------------------------------------------------

def base_layout(title: str, x_title: str = "", y_title: str = "", **extra: Any) -> Dict[str, Any]:
    layout = dict(
        title=dict(text=title, x=0.5),
        template="plotly_white",
        width=720,
        height=520,
        margin={"r": 20, "t": 60, "b": 50, "l": 60},
        legend=dict(bgcolor="rgba(255,255,255,0.8)", bordercolor="black", borderwidth=1),
        xaxis=dict(title=x_title),
        yaxis=dict(title=y_title),
    )
    layout.update(extra)
    return layout


def save_svg(fig: go.Figure, path: str) -> Optional[str]:
    """Write fig as SVG through kaleido; a failure is logged and returns None."""
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        fig.write_image(path, format="svg")
    except (ValueError, OSError, RuntimeError, ImportError) as e:
        logger.warning(f"[Plots] Could not write {path}: {e}")
        return None
    return path
