"""Gram statistics and the weighted multi-layer texture loss.

A feature map F of shape (n_f, vs_f) is summarized by its normalized Gram
matrix G = F F^T / vs_f. Dividing each instance by its own spatial size
makes Gram matrices of different-resolution images directly comparable,
which is what lets the merged canvas be scored against a smaller exemplar.
For equal sizes the layer term below is algebraically identical to keeping
the division in the loss.

Functions here accept either numpy arrays or torch tensors and return the
matching kind; torch inputs keep their autograd graph. Accumulation happens
in double precision either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import NonFiniteError
from .features import LAYERS

DEFAULT_WEIGHTS = tuple(1.0 / len(LAYERS) for _ in LAYERS)


@dataclass(frozen=True)
class LossConfig:
    """Contributing layers and their non-negative weights (default 1/5 each)."""

    layers: tuple = LAYERS
    weights: tuple = DEFAULT_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.layers) != len(self.weights):
            raise ValueError(
                f"{len(self.layers)} layers but {len(self.weights)} weights")
        if not self.layers:
            raise ValueError("at least one layer required")
        for name in self.layers:
            if name not in LAYERS:
                raise ValueError(f"unknown layer {name!r}; known layers: {LAYERS}")
        if len(set(self.layers)) != len(self.layers):
            raise ValueError("duplicate layer in config")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one weight must be positive")


def gram_matrix(features):
    """Normalized Gram matrix F F^T / vs_f of an (n_f, vs_f) feature map."""
    if features.ndim != 2:
        raise ValueError(f"feature map must be 2-D, got shape {tuple(features.shape)}")
    n_f, vs_f = features.shape
    if n_f < 1 or vs_f < 1:
        raise ValueError(f"feature map must be non-empty, got shape ({n_f}, {vs_f})")
    if torch.is_tensor(features):
        if not torch.isfinite(features).all():
            raise NonFiniteError("non-finite activations in feature map")
        f = features.to(torch.float64)
        return (f @ f.T) / vs_f
    features = np.asarray(features, dtype=np.float64)
    if not np.isfinite(features).all():
        raise NonFiniteError("non-finite activations in feature map")
    return (features @ features.T) / vs_f


def layer_loss(g_orig, g_merged, n_f: int, w: float):
    """Per-layer term w/(4 n_f^2) * sum((G_orig - G_merged)^2)."""
    if tuple(g_orig.shape) != (n_f, n_f) or tuple(g_merged.shape) != (n_f, n_f):
        raise ValueError(
            f"dimension mismatch: expected ({n_f}, {n_f}) Gram matrices, got "
            f"{tuple(g_orig.shape)} and {tuple(g_merged.shape)}")
    if torch.is_tensor(g_merged) and isinstance(g_orig, np.ndarray):
        g_orig = torch.from_numpy(np.asarray(g_orig, dtype=np.float64))
    diff = g_orig - g_merged
    return (w / (4.0 * n_f * n_f)) * (diff * diff).sum()


def loss_from_grams(target_grams: dict, feats: dict, cfg: LossConfig):
    """Total loss of feature maps against precomputed target Gram matrices.

    Returns (total, {layer: term}); torch feature inputs yield torch scalars
    carrying the autograd graph.
    """
    total = 0.0
    terms = {}
    for name, w in zip(cfg.layers, cfg.weights):
        if name not in target_grams or name not in feats:
            raise ValueError(f"missing layer {name!r}")
        g_m = gram_matrix(feats[name])
        g_o = target_grams[name]
        n_f = int(g_o.shape[0])
        if int(feats[name].shape[0]) != n_f:
            raise ValueError(
                f"n_f mismatch for {name!r}: {n_f} vs {int(feats[name].shape[0])}")
        term = layer_loss(g_o, g_m, n_f, w)
        terms[name] = term
        total = total + term
    return total, terms


def total_loss(feat_orig: dict, feat_merged: dict, cfg: LossConfig):
    """Weighted sum of per-layer Gram losses between two feature sets.

    Per-layer n_f must agree; spatial sizes vs_f may differ between the two
    instances.
    """
    for name in cfg.layers:
        if name not in feat_orig or name not in feat_merged:
            raise ValueError(f"missing layer {name!r}")
    targets = {name: gram_matrix(feat_orig[name]) for name in cfg.layers}
    total, _ = loss_from_grams(targets, feat_merged, cfg)
    return total
