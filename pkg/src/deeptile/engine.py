"""Orchestration: directional tiling, hole filling, and stepwise expansion.

Everything here composes the canvas primitives with the optimizer. A tile
job builds an initializer (seam-removal blend or plain noise), merges it
with the exemplar, optimizes the free half, and hands back the synthesized
tile. Expansion folds tile jobs, each step treating the grown canvas as the
new exemplar. Hole filling freezes everything outside the hole and scores
the canvas against the largest hole-free rectangle.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import GeometryError
from .image import (DIRECTIONS, MergedCanvas, SeamNoiseConfig, _round_half_away,
                    alpha_optimal, build_merged_canvas, make_seam_init,
                    make_white_noise, tile_geometry, validate_image)
from .optim import OptimConfig, OptimTrace, synthesize

MIN_EXEMPLAR = 16


@dataclass(frozen=True)
class TileRequest:
    """One directional tiling step."""

    direction: str
    factor_w: float = 1.0
    factor_h: float = 1.0
    seam_removal: bool = True
    alpha: object = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}; "
                             f"expected one of {DIRECTIONS}")
        if not (self.factor_w > 0 and self.factor_h > 0):
            raise ValueError(f"tiling factors must be > 0, got "
                             f"({self.factor_w}, {self.factor_h})")
        if self.alpha != "auto":
            a = float(self.alpha)
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha must be in (0, 1) or 'auto', got {a}")
            object.__setattr__(self, "alpha", a)
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class HoleSpec:
    """Missing rectangle (top, left, height, width) in canvas coordinates."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("hole must be non-empty")
        if self.top < 0 or self.left < 0:
            raise ValueError("hole origin must be inside the canvas")


def resolve_alpha(req: TileRequest, exemplar_h: int, exemplar_w: int) -> float:
    """Explicit alpha, or the optimal value for the seam-perpendicular extent."""
    if req.alpha != "auto":
        return float(req.alpha)
    c = exemplar_w if req.direction in ("left", "right") else exemplar_h
    return alpha_optimal(c)


def extract_tile(merged: MergedCanvas) -> np.ndarray:
    """The free-region slice of a directional merged canvas."""
    g = merged.geometry
    if g is None or g.direction not in DIRECTIONS:
        raise GeometryError("canvas has no directional tile geometry")
    img = merged.image
    if g.direction == "right":
        return img[:, g.seam_axis:]
    if g.direction == "left":
        return img[:, :g.seam_axis]
    if g.direction == "down":
        return img[g.seam_axis:, :]
    return img[:g.seam_axis, :]


def tile(original: np.ndarray, req: TileRequest, weights, loss_cfg,
         opt_cfg: OptimConfig, checkpoint_cb=None
         ) -> tuple[np.ndarray, MergedCanvas, OptimTrace]:
    """Synthesize one tile next to the exemplar.

    Returns (tile image, full merged canvas, trace). The canvas restricted
    to the exemplar region equals the exemplar bit-exactly.
    """
    validate_image(original, "original")
    h, w = original.shape[:2]
    if h < MIN_EXEMPLAR or w < MIN_EXEMPLAR:
        raise GeometryError(f"exemplar too small: {h}x{w}, need at least "
                            f"{MIN_EXEMPLAR}x{MIN_EXEMPLAR}")
    geometry = tile_geometry(h, w, req.direction, req.factor_w, req.factor_h)
    if req.seam_removal:
        alpha = resolve_alpha(req, h, w)
        c = w if req.direction in ("left", "right") else h
        init = make_seam_init(original, geometry,
                              SeamNoiseConfig(alpha=alpha, seed=req.seed, c=c))
    else:
        init = make_white_noise(geometry.tile_height, geometry.tile_width,
                                req.seed)
    canvas = build_merged_canvas(original, init, req.direction)
    merged, trace = synthesize(original, canvas, weights, loss_cfg, opt_cfg,
                               checkpoint_cb=checkpoint_cb)
    return extract_tile(merged), merged, trace


def _anchor_step(req: TileRequest, canvas_shape, h0: int, w0: int
                 ) -> TileRequest:
    """Re-express an original-anchored factor against the current canvas.

    A plan step's band thickness is factor x the ORIGINAL exemplar extent;
    tile() sizes tiles against the exemplar it receives (the grown canvas),
    so the factor is rescaled to land on the same pixel count.
    """
    ch, cw = canvas_shape[:2]
    if req.direction in ("left", "right"):
        desired = max(1, _round_half_away(req.factor_w * w0))
        return replace(req, factor_w=desired / cw)
    desired = max(1, _round_half_away(req.factor_h * h0))
    return replace(req, factor_h=desired / ch)


def run_plan(original: np.ndarray, plan, weights, loss_cfg,
             opt_cfg: OptimConfig, checkpoint_cb=None
             ) -> tuple[np.ndarray, list]:
    """Fold tile() over a list of TileRequests, growing the canvas each step.

    Each step's exemplar/fixed content is the full canvas produced so far,
    while band thicknesses stay anchored to the original exemplar:
    [right 1, right 1] triples the width rather than quadrupling it.
    Returns the final canvas and the per-step traces.
    """
    validate_image(original, "original")
    canvas = original
    h0, w0 = original.shape[:2]
    traces = []
    for req in plan:
        step = _anchor_step(req, canvas.shape, h0, w0)
        _, merged, trace = tile(canvas, step, weights, loss_cfg, opt_cfg,
                                checkpoint_cb=checkpoint_cb)
        canvas = merged.image
        traces.append(trace)
    return canvas, traces


def expand(original: np.ndarray, plan, weights, loss_cfg,
           opt_cfg: OptimConfig) -> np.ndarray:
    """The canvas produced by run_plan; an empty plan returns the original."""
    canvas, _ = run_plan(original, plan, weights, loss_cfg, opt_cfg)
    return canvas


def plan_to_json(plan) -> str:
    """Serialize TileRequests as a JSON array."""
    return json.dumps([asdict(req) for req in plan], indent=2)


def plan_from_json(text: str):
    """Parse a JSON array of tile-request objects into TileRequests.

    Unknown keys are rejected; missing keys fall back to TileRequest
    defaults.
    """
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("expansion plan must be a JSON array")
    allowed = {"direction", "factor_w", "factor_h", "seam_removal", "alpha",
               "seed"}
    plan = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise ValueError(f"plan step {i} must be an object")
        unknown = set(item) - allowed
        if unknown:
            raise ValueError(f"plan step {i} has unknown keys: {sorted(unknown)}")
        if "direction" not in item:
            raise ValueError(f"plan step {i} is missing 'direction'")
        plan.append(TileRequest(**item))
    return plan


def largest_free_rectangle(usable: np.ndarray) -> tuple[int, int, int, int]:
    """Largest all-True axis-aligned rectangle of a boolean (H, W) mask.

    Returns (top, left, height, width). Ties on area prefer the topmost,
    then leftmost, then tallest candidate. Raises if the mask holds no True
    cell.
    """
    if usable.ndim != 2:
        raise ValueError("mask must be 2-D")
    h, w = usable.shape
    best = None  # (area, top, left, height, width)

    def better(cand, incumbent):
        if incumbent is None:
            return True
        ca, ct, cl, ch, _ = cand
        ia, it_, il, ih, _ = incumbent
        return (ca, -ct, -cl, ch) > (ia, -it_, -il, ih)

    heights = np.zeros(w, dtype=np.int64)
    for row in range(h):
        heights = np.where(usable[row], heights + 1, 0)
        # Largest rectangle in histogram, stack of column indices with
        # nondecreasing heights.
        stack = []
        for col in range(w + 1):
            cur = heights[col] if col < w else 0
            start = col
            while stack and stack[-1][1] > cur:
                left, height = stack.pop()
                if height > 0:
                    cand = (height * (col - left), row - height + 1, left,
                            int(height), col - left)
                    if better(cand, best):
                        best = cand
                start = left
            if not stack or stack[-1][1] < cur:
                stack.append((start, int(cur)))
    if best is None:
        raise GeometryError("mask has no free cell")
    _, top, left, height, width = best
    return int(top), int(left), int(height), int(width)


def fill_hole(canvas: np.ndarray, hole: HoleSpec, weights, loss_cfg,
              opt_cfg: OptimConfig, seed: int = 0,
              checkpoint_cb=None) -> tuple[np.ndarray, OptimTrace]:
    """Re-synthesize a missing rectangle from the surrounding texture.

    The hole is seeded with white noise and optimized against the Gram
    statistics of the largest hole-free rectangle of the canvas. Pixels
    outside the hole are never modified.
    """
    validate_image(canvas, "canvas")
    h, w = canvas.shape[:2]
    if h < MIN_EXEMPLAR or w < MIN_EXEMPLAR:
        raise GeometryError(f"canvas too small: {h}x{w}")
    if hole.top + hole.height > h or hole.left + hole.width > w:
        raise GeometryError(
            f"hole {hole} extends outside the {h}x{w} canvas")
    if hole.height == h and hole.width == w:
        raise GeometryError("hole equals full canvas; nothing to condition on")

    fixed = np.ones((h, w), dtype=bool)
    rows = slice(hole.top, hole.top + hole.height)
    cols = slice(hole.left, hole.left + hole.width)
    fixed[rows, cols] = False

    top, left, eh, ew = largest_free_rectangle(fixed)
    if eh < MIN_EXEMPLAR or ew < MIN_EXEMPLAR:
        raise GeometryError(
            f"no hole-free rectangle of at least {MIN_EXEMPLAR}x"
            f"{MIN_EXEMPLAR} exists (best is {eh}x{ew})")
    exemplar = np.ascontiguousarray(canvas[top:top + eh, left:left + ew])

    init = canvas.copy()
    init[rows, cols] = make_white_noise(hole.height, hole.width, seed)
    merged = MergedCanvas(image=init, fixed_mask=fixed, geometry=hole)
    out, trace = synthesize(exemplar, merged, weights, loss_cfg, opt_cfg,
                            checkpoint_cb=checkpoint_cb)
    return out.image, trace
