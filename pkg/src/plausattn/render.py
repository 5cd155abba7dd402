"""Token heatmap documents: model attention, human annotation, and heuristic
target side by side, as shaded text or a self-contained HTML page.

The model track shows the min-max scaled attention map (the same view the
evaluation protocol scores); raw softmax values are available behind a flag.
"""

from __future__ import annotations

import html
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .metrics import minmax_scale

SHADE_CHARS = " ░▒▓█"


@dataclass
class TrackRow:
    name: str
    values: list[float]


@dataclass
class HeatmapExample:
    example_id: str
    segments: list[dict]  # {"tokens": [...], "tracks": [TrackRow, ...]}


@dataclass
class HeatmapDocument:
    """Aligned per-token value tracks for a set of examples."""

    constraint_kind: str
    lam: float
    examples: list[HeatmapExample] = field(default_factory=list)


def build_document(records: Sequence[dict], constraint_kind: str, lam: float,
                   scale_model_track: bool = True) -> HeatmapDocument:
    """records: {"id", "segments": [{"tokens": [str], "model": [float],
    "human": [0/1] | None, "heuristic": [float] | None}]}"""
    doc = HeatmapDocument(constraint_kind=constraint_kind, lam=lam)
    for rec in records:
        segments = []
        for seg in rec["segments"]:
            tokens = list(seg["tokens"])
            tracks = []
            model_values = np.asarray(seg["model"], dtype=np.float64)
            if scale_model_track:
                model_values = minmax_scale(model_values).values
            tracks.append(TrackRow("model", [float(v) for v in model_values]))
            if seg.get("human") is not None:
                tracks.append(TrackRow("human", [float(v) for v in seg["human"]]))
            if seg.get("heuristic") is not None:
                tracks.append(TrackRow("heuristic", _unit_scale(seg["heuristic"])))
            for tr in tracks:
                if len(tr.values) != len(tokens):
                    raise ValueError(
                        f"track {tr.name} of example {rec['id']} has {len(tr.values)} "
                        f"values for {len(tokens)} tokens")
            segments.append({"tokens": tokens, "tracks": tracks})
        doc.examples.append(HeatmapExample(example_id=rec["id"], segments=segments))
    return doc


def _unit_scale(values) -> list[float]:
    v = np.asarray(values, dtype=np.float64)
    top = v.max() if v.size else 0.0
    if top <= 0:
        return [0.0 for _ in v]
    return [float(x / top) for x in v]


def render_text(doc: HeatmapDocument) -> str:
    """Shading-character rendering, one block per example."""
    lines = [f"constraint={doc.constraint_kind} lambda={doc.lam}"]
    for ex in doc.examples:
        lines.append("")
        lines.append(f"== {ex.example_id}")
        for s, seg in enumerate(ex.segments):
            widths = [max(len(t), 1) for t in seg["tokens"]]
            if len(ex.segments) > 1:
                lines.append(f"-- segment {s}")
            lines.append("tokens     " + " ".join(seg["tokens"]))
            for tr in seg["tracks"]:
                cells = [_shade(v) * w for v, w in zip(tr.values, widths)]
                lines.append(f"{tr.name:<10} " + " ".join(cells))
    return "\n".join(lines) + "\n"


def _shade(value: float) -> str:
    idx = min(int(max(0.0, min(1.0, value)) * (len(SHADE_CHARS) - 1) + 0.5),
              len(SHADE_CHARS) - 1)
    return SHADE_CHARS[idx]


def render_html(doc: HeatmapDocument) -> str:
    """Self-contained XHTML page; value shown as background opacity."""
    parts = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<html xmlns="http://www.w3.org/1999/xhtml"><head>',
        "<title>attention heatmaps</title>",
        "<style>body{font-family:monospace} .tok{padding:2px;margin:1px;"
        "border-radius:3px;display:inline-block} .row{margin:2px 0} "
        ".name{display:inline-block;width:90px;color:#555}</style>",
        "</head><body>",
        f"<p>constraint: <b>{html.escape(doc.constraint_kind)}</b>, "
        f"lambda: <b>{doc.lam}</b></p>",
    ]
    for ex in doc.examples:
        parts.append(f'<div class="example"><h4>{html.escape(ex.example_id)}</h4>')
        for seg in ex.segments:
            parts.append('<div class="segment">')
            for tr in seg["tracks"]:
                spans = []
                for tok, v in zip(seg["tokens"], tr.values):
                    v = max(0.0, min(1.0, v))
                    spans.append(
                        f'<span class="tok" style="background-color:'
                        f'rgba(214,39,40,{v:.3f})">{html.escape(tok)}</span>')
                parts.append(f'<div class="row"><span class="name">{html.escape(tr.name)}'
                             f"</span>{''.join(spans)}</div>")
            parts.append("</div>")
        parts.append("</div>")
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"
