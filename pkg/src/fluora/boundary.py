"""Strip-wise classification along the colonic axis and boundary location.

A frame is tiled into 100-pixel strips along the longitudinal axis, each
strip is classified, and the perfusion boundary is placed at the distal
edge of the most distal fluorescent strip. Non-contiguous patterns
(fluorescent after a gap) keep the literal most-distal rule but drop the
contiguous flag so callers can surface the anomaly.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .classifier import apply_threshold, predict
from .dataset import DISTAL_DECREASING, DISTAL_INCREASING, LABEL_FLUORESCENT
from .errors import EmptyInput, ImageTooNarrow, NoFluorescentRegion
from .imgio import load_image

AXIS_HORIZONTAL = "horizontal"
AXIS_VERTICAL = "vertical"
DEFAULT_STRIP_WIDTH = 100

BOX_FLUORESCENT = (0, 200, 0)
BOX_NOT_FLUORESCENT = (128, 128, 128)
BOUNDARY_COLOR = (255, 220, 0)


@dataclass(frozen=True)
class StripClassification:
    index: int          # ordinal from the proximal end
    x0: int             # interval along the longitudinal axis, [x0, x1)
    x1: int
    probability: float
    label: str

    def to_json(self):
        return {"index": self.index, "x0": self.x0, "x1": self.x1,
                "probability": round(self.probability, 6), "label": self.label}


@dataclass(frozen=True)
class BoundaryEstimate:
    boundary_x: int | None
    distal_direction: str
    strips: tuple
    contiguous: bool
    threshold: float
    saturated: bool = False

    def to_json(self):
        return {"boundary_x": self.boundary_x,
                "distal_direction": self.distal_direction,
                "contiguous": self.contiguous,
                "saturated": self.saturated,
                "threshold": self.threshold,
                "strips": [s.to_json() for s in self.strips]}


def tile(image, strip_width=DEFAULT_STRIP_WIDTH, axis=AXIS_HORIZONTAL):
    """Partition the frame into strips along the axis.

    Full-width strips plus one remainder strip when the extent is not a
    multiple; intervals exactly cover [0, extent). Returns a list of
    (strip_image, (x0, x1)) in ascending coordinate order.
    """
    if strip_width < 1:
        raise ValueError("strip_width must be >= 1")
    if axis not in (AXIS_HORIZONTAL, AXIS_VERTICAL):
        raise ValueError(f"unknown axis {axis!r}")
    extent = image.shape[1] if axis == AXIS_HORIZONTAL else image.shape[0]
    if extent < strip_width:
        raise ImageTooNarrow(
            f"extent {extent} is narrower than one {strip_width} px strip")
    edges = list(range(0, extent, strip_width)) + [extent]
    out = []
    for i in range(len(edges) - 1):
        x0, x1 = edges[i], edges[i + 1]
        if x1 == x0:
            continue
        if axis == AXIS_HORIZONTAL:
            strip = np.ascontiguousarray(image[:, x0:x1])
        else:
            strip = np.ascontiguousarray(image[x0:x1, :])
        out.append((strip, (x0, x1)))
    return out


def classify_strips(artifact, strips, threshold=None):
    """Per-strip probability and label, in tile order."""
    thr = artifact.threshold if threshold is None else threshold
    out = []
    for i, (strip, (x0, x1)) in enumerate(strips):
        result = predict(artifact, strip)
        out.append(StripClassification(
            index=i, x0=x0, x1=x1, probability=result.probability,
            label=apply_threshold(result.probability, thr)))
    return out


def _proximal_order(strips, distal_direction):
    reverse = distal_direction == DISTAL_DECREASING
    return sorted(strips, key=lambda s: s.x0, reverse=reverse)


def estimate_boundary(strips, distal_direction, threshold=None):
    """Boundary at the distal edge of the most distal fluorescent strip.

    Raises NoFluorescentRegion (carrying the strips) when nothing is
    fluorescent; flags saturated when everything is. Strips in the estimate
    are re-indexed in proximal-to-distal order.
    """
    if distal_direction not in (DISTAL_INCREASING, DISTAL_DECREASING):
        raise ValueError(f"unknown distal_direction {distal_direction!r}")
    strips = list(strips)
    if not strips:
        raise EmptyInput("no strips given")
    ordered = [
        StripClassification(index=i, x0=s.x0, x1=s.x1,
                            probability=s.probability, label=s.label)
        for i, s in enumerate(_proximal_order(strips, distal_direction))
    ]
    fluoro = [s.index for s in ordered if s.label == LABEL_FLUORESCENT]
    if not fluoro:
        raise NoFluorescentRegion(strips=ordered)
    last = max(fluoro)
    contiguous = all(ordered[k].label == LABEL_FLUORESCENT for k in range(last + 1))
    saturated = last == len(ordered) - 1
    most_distal = ordered[last]
    if distal_direction == DISTAL_INCREASING:
        boundary_x = most_distal.x1
    else:
        boundary_x = most_distal.x0
    return BoundaryEstimate(
        boundary_x=boundary_x, distal_direction=distal_direction,
        strips=tuple(ordered), contiguous=contiguous, threshold=threshold,
        saturated=saturated)


def analyze_image(artifact, image, strip_width=DEFAULT_STRIP_WIDTH,
                  axis=AXIS_HORIZONTAL, distal_direction=DISTAL_INCREASING,
                  threshold=None, export_dir=None):
    """Tile, classify, and locate the boundary in one call.

    export_dir, when given, receives the strips as JPEG files (their
    on-disk form in the original workflow). NoFluorescentRegion propagates.
    """
    if not isinstance(image, np.ndarray):
        image = load_image(image)
    strips = tile(image, strip_width=strip_width, axis=axis)
    if export_dir is not None:
        export_dir = Path(export_dir)
        export_dir.mkdir(parents=True, exist_ok=True)
        for i, (strip, (x0, x1)) in enumerate(strips):
            Image.fromarray(strip, mode="RGB").save(
                export_dir / f"strip_{i:03d}_{x0}_{x1}.jpg", quality=95)
    thr = artifact.threshold if threshold is None else threshold
    classified = classify_strips(artifact, strips, threshold=thr)
    est = estimate_boundary(classified, distal_direction, threshold=thr)
    return est


def render_boundary_overlay(image, estimate, axis=AXIS_HORIZONTAL):
    """Annotated frame: green boxes on fluorescent strips, grey on the rest,
    and a yellow line at the boundary when present."""
    pil = Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB")
    draw = ImageDraw.Draw(pil)
    h, w = image.shape[:2]
    inset = 3
    for s in estimate.strips:
        color = BOX_FLUORESCENT if s.label == LABEL_FLUORESCENT else BOX_NOT_FLUORESCENT
        if axis == AXIS_HORIZONTAL:
            box = [s.x0 + inset, inset, s.x1 - 1 - inset, h - 1 - inset]
        else:
            box = [inset, s.x0 + inset, w - 1 - inset, s.x1 - 1 - inset]
        draw.rectangle(box, outline=color, width=3)
    if estimate.boundary_x is not None:
        b = int(np.clip(estimate.boundary_x, 1, (w if axis == AXIS_HORIZONTAL else h) - 2))
        if axis == AXIS_HORIZONTAL:
            draw.rectangle([b - 1, 0, b + 1, h - 1], fill=BOUNDARY_COLOR)
        else:
            draw.rectangle([0, b - 1, w - 1, b + 1], fill=BOUNDARY_COLOR)
    return np.asarray(pil, dtype=np.uint8)
