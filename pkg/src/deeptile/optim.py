"""Adam-driven synthesis of the free region of a merged canvas.

The loop matches the two-instance design: Gram targets are computed once
from the exemplar, then every iteration forwards the full canvas, scores it
against the targets, and updates only the free pixels. The exemplar region
is doubly protected: its gradient entries are zeroed (so Adam moments stay
zero there) and its pixel values are re-imposed after every step, making the
fixed region bit-exact for any iteration count.

Pixel values evolve unconstrained during optimization; clamping to [0, 255]
happens only when an image is encoded to PNG.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import GeometryError, NonFiniteError, OptimizationError
from .features import LAYERS, forward_features, input_gradient
from .gram import LossConfig, gram_matrix, loss_from_grams
from .image import MergedCanvas, validate_image

_NP_DTYPES = {"single": np.float32, "double": np.float64}

# Fixed CSV schema; layers absent from the loss config log as 0.0.
TRACE_HEADER = ("iteration", "total_loss", "loss_layer1", "loss_pool1",
                "loss_pool2", "loss_pool3", "loss_pool4", "ms")


@dataclass(frozen=True)
class OptimConfig:
    """Adam and loop settings. Defaults are the full-scale profile."""

    iterations: int = 100000
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    checkpoint_every: int | None = None
    log_every: int = 100
    seed: int = 0
    precision: str = "single"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1 or None")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.precision not in _NP_DTYPES:
            raise ValueError(
                f"precision must be 'single' or 'double', got {self.precision!r}")


@dataclass
class OptimState:
    """Adam accumulators over the flattened free-pixel vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int, dtype=np.float32) -> "OptimState":
        return cls(m=np.zeros(n, dtype=dtype), v=np.zeros(n, dtype=dtype), t=0)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    total_loss: float
    layer_losses: dict
    ms: float


@dataclass
class OptimTrace:
    """Logged loss history of one synthesis run."""

    records: list = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError("trace iterations must be strictly increasing")
        self.records.append(record)

    @property
    def initial_loss(self) -> float:
        return self.records[0].total_loss

    @property
    def final_loss(self) -> float:
        return self.records[-1].total_loss

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(TRACE_HEADER)
            for rec in self.records:
                row = [rec.iteration, repr(rec.total_loss)]
                row += [repr(rec.layer_losses.get(layer, 0.0)) for layer in LAYERS]
                row.append(repr(rec.ms))
                writer.writerow(row)


def adam_step(params: np.ndarray, grads: np.ndarray, state: OptimState,
              cfg: OptimConfig) -> tuple[np.ndarray, OptimState]:
    """One bias-corrected Adam update. Pure: returns new params and state."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}")
    if not np.isfinite(grads).all():
        raise NonFiniteError("non-finite gradient")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (grads * grads)
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_params, OptimState(m=m, v=v, t=t)


def synthesize(original: np.ndarray, init_canvas: MergedCanvas,
               weights, loss_cfg: LossConfig, opt_cfg: OptimConfig,
               checkpoint_cb=None) -> tuple[MergedCanvas, OptimTrace]:
    """Optimize the free region of the canvas toward the exemplar's Gram stats.

    checkpoint_cb, if given, is called as cb(iteration, image) every
    checkpoint_every iterations with the current canvas as float64.
    Raises OptimizationError naming the iteration if the loss goes
    non-finite.
    """
    validate_image(original, "original")
    image = init_canvas.image
    fixed = init_canvas.fixed_mask
    validate_image(image, "canvas")
    if image.shape[:2] != fixed.shape:
        raise GeometryError(
            f"fixed mask shape {fixed.shape} does not match canvas "
            f"{image.shape[:2]}")
    h, w = image.shape[:2]
    if h < 16 or w < 16:
        raise GeometryError(f"canvas too small: {h}x{w}, need at least 16x16")
    trace = OptimTrace()
    if opt_cfg.iterations == 0:
        out = MergedCanvas(image=image.copy(), fixed_mask=fixed.copy(),
                           geometry=init_canvas.geometry)
        return out, trace

    free = ~fixed
    if not free.any():
        raise GeometryError("canvas has no free pixels to optimize")
    dtype = _NP_DTYPES[opt_cfg.precision]

    feats_orig = forward_features(weights, original, loss_cfg.layers,
                                  opt_cfg.precision)
    targets = {name: torch.from_numpy(gram_matrix(feats_orig[name]))
               for name in loss_cfg.layers}

    work = image.astype(dtype)
    fixed_values = work[fixed].copy()
    params = work[free].ravel()
    state = OptimState.zeros(params.size, dtype=dtype)
    seen = {}

    def loss_fn(feats):
        total, terms = loss_from_grams(targets, feats, loss_cfg)
        seen["total"] = float(total.detach())
        seen["layers"] = {name: float(term.detach())
                          for name, term in terms.items()}
        return total

    def current_image() -> np.ndarray:
        out = work.astype(np.float64)
        out[fixed] = image[fixed]
        return out

    t0 = time.perf_counter()
    for it in range(1, opt_cfg.iterations + 1):
        try:
            grad = input_gradient(weights, work, loss_fn, loss_cfg.layers,
                                  opt_cfg.precision)
        except NonFiniteError as exc:
            raise OptimizationError(f"{exc} at iteration {it}") from exc
        if not np.isfinite(seen["total"]):
            raise OptimizationError(
                f"non-finite total loss at iteration {it}")
        grad[fixed] = 0.0
        g_free = grad[free].ravel().astype(dtype)
        try:
            params, state = adam_step(params, g_free, state, opt_cfg)
        except NonFiniteError as exc:
            raise OptimizationError(f"{exc} at iteration {it}") from exc
        work[free] = params.reshape(-1, 3)
        work[fixed] = fixed_values
        if it == 1 or it % opt_cfg.log_every == 0 or it == opt_cfg.iterations:
            ms = (time.perf_counter() - t0) * 1000.0
            trace.append(TraceRecord(iteration=it, total_loss=seen["total"],
                                     layer_losses=dict(seen["layers"]), ms=ms))
        if (checkpoint_cb is not None and opt_cfg.checkpoint_every
                and it % opt_cfg.checkpoint_every == 0):
            checkpoint_cb(it, current_image())

    out = MergedCanvas(image=current_image(), fixed_mask=fixed.copy(),
                       geometry=init_canvas.geometry)
    return out, trace
