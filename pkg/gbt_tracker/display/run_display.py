"""
Per-run figures: xy trajectories, error with bound and CCBM, predicted-motion snapshots.
"""

import logging
import os
from typing import List, Sequence

import numpy as np
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from ..models import StepRecord
from .display import AUV_COLOR, BOUND_COLOR, TARGET_COLOR, base_layout, color_for_label, create_default_display, save_svg

logger = logging.getLogger(__name__)


def create_trajectory_figure(records: Sequence[StepRecord]) -> go.Figure:
    if not records:
        return create_default_display("Trajectories")
    target = np.array([[r.target_x, r.target_y] for r in records])
    auv = np.array([[r.auv_x, r.auv_y] for r in records])

    fig = go.Figure()
    fig.add_trace(go.Scatter(x=target[:, 0], y=target[:, 1], mode="lines", name="target",
                             line={"color": TARGET_COLOR, "width": 2}))
    fig.add_trace(go.Scatter(x=auv[:, 0], y=auv[:, 1], mode="lines", name="AUV",
                             line={"color": AUV_COLOR, "width": 2}))
    fig.add_trace(go.Scatter(x=[target[0, 0], auv[0, 0]], y=[target[0, 1], auv[0, 1]], mode="markers",
                             name="start", marker={"color": "black", "size": 8, "symbol": "x"}))
    fig.update_layout(**base_layout("Motion trajectories", "x (m)", "y (m)"))
    fig.update_yaxes(scaleanchor="x", scaleratio=1)
    return fig


def create_error_figure(records: Sequence[StepRecord], log_scale: bool = False) -> go.Figure:
    """avg_err and the bound share the left axis; ccbm uses the right axis."""
    if not records:
        return create_default_display("Tracking error")
    t = [r.t for r in records]
    fig = make_subplots(specs=[[{"secondary_y": True}]])
    fig.add_trace(go.Scatter(x=t, y=[r.avg_err for r in records], mode="lines", name="avg error",
                             line={"color": TARGET_COLOR, "width": 2}), secondary_y=False)
    fig.add_trace(go.Scatter(x=t, y=[r.bound for r in records], mode="lines", name="bound",
                             line={"color": BOUND_COLOR, "width": 1, "dash": "dash"}), secondary_y=False)
    ccbm = [r.ccbm if np.isfinite(r.ccbm) else None for r in records]
    fig.add_trace(go.Scatter(x=t, y=ccbm, mode="lines", name="CCBM",
                             line={"color": AUV_COLOR, "width": 1}), secondary_y=True)
    fig.update_layout(**base_layout("Tracking error", "t (s)"))
    fig.update_yaxes(title_text="error (m)", type="log" if log_scale else "linear", secondary_y=False)
    fig.update_yaxes(title_text="log10 cond(P)", secondary_y=True)
    return fig


def create_snapshot_figure(records: Sequence[StepRecord], times: Sequence[float]) -> go.Figure:
    """Predicted versus true target motion over the horizon at the step nearest each snapshot time."""
    usable = [r for r in records if r.horizon_means is not None]
    if not usable:
        return create_default_display("Predicted motion")
    steps = np.array([r.t for r in usable])

    fig = go.Figure()
    for snapshot in times:
        record = usable[int(np.argmin(np.abs(steps - snapshot)))]
        color = color_for_label(f"{snapshot:g}")
        fig.add_trace(go.Scatter(x=record.horizon_truth[:, 0], y=record.horizon_truth[:, 1], mode="lines",
                                 name=f"true t={record.t:g}s", line={"color": color, "width": 2},
                                 legendgroup=f"{snapshot:g}"))
        fig.add_trace(go.Scatter(x=record.horizon_means[:, 0], y=record.horizon_means[:, 1], mode="lines+markers",
                                 name=f"predicted t={record.t:g}s", marker={"size": 4},
                                 line={"color": color, "width": 1, "dash": "dot"}, legendgroup=f"{snapshot:g}"))
        fig.add_trace(go.Scatter(x=[record.auv_x], y=[record.auv_y], mode="markers", showlegend=False,
                                 marker={"color": color, "size": 8, "symbol": "triangle-up"},
                                 legendgroup=f"{snapshot:g}"))
    fig.update_layout(**base_layout("Predicted motion", "x (m)", "y (m)"))
    fig.update_yaxes(scaleanchor="x", scaleratio=1)
    return fig


def emit_plots(records: Sequence[StepRecord], out_dir: str, snapshot_times: Sequence[float] = (5.0, 10.0, 15.0, 20.0),
               log_scale: bool = False) -> List[str]:
    """Write the three per-run SVGs; returns the paths actually written."""
    if not records:
        logger.warning("[Plots] No records, skipping plots")
        return []
    figures = {
        "trajectories.svg": create_trajectory_figure(records),
        "error.svg": create_error_figure(records, log_scale),
        "snapshots.svg": create_snapshot_figure(records, snapshot_times),
    }
    written = [save_svg(fig, os.path.join(out_dir, name)) for name, fig in figures.items()]
    written = [path for path in written if path]
    if len(written) < len(figures):
        logger.warning(f"[Plots] Wrote {len(written)} of {len(figures)} figures; the CSV log is unaffected")
    return written
