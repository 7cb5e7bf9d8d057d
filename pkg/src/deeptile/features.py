"""Feature extraction: VGG19 blocks 1-4 with average pooling.

The texture statistics are read from five points of the network: the ReLU
output of the first convolution (``layer1``) and the outputs of the four
pooling stages (``pool1`` .. ``pool4``). All pooling is 2x2 average pooling
with stride 2 (floor semantics); convolutions are 3x3, zero-padded, each
followed by ReLU.

Images enter as (H, W, 3) float RGB in [0, 255]. Preprocessing subtracts the
fixed per-channel means and nothing else, so the preprocessing Jacobian is
the identity and gradients w.r.t. the preprocessed tensor are gradients
w.r.t. the image.

torch supplies convolution, pooling, and reverse-mode differentiation; all
network structure and parameters live in this package.
"""

from __future__ import annotations

import weakref

import numpy as np
import torch
import torch.nn.functional as F

from .errors import GeometryError, NonFiniteError, OptimizationError
from .image import validate_image
from .weights import CONV_NAMES, NetworkWeights, validate_weights

# Per-channel RGB means subtracted before the first convolution.
VGG_MEAN = np.array([123.68, 116.779, 103.939], dtype=np.float64)

# Capture points, shallow to deep, as exposed to the loss.
LAYERS = ("layer1", "pool1", "pool2", "pool3", "pool4")

MIN_SIZE = 16

# Forward schedule: conv = 3x3 conv + ReLU, capture = expose current
# activations, pool = 2x2 average pool then expose under the pool name.
_SEQUENCE = (
    ("conv", "conv1_1"), ("capture", "layer1"),
    ("conv", "conv1_2"), ("pool", "pool1"),
    ("conv", "conv2_1"), ("conv", "conv2_2"), ("pool", "pool2"),
    ("conv", "conv3_1"), ("conv", "conv3_2"), ("conv", "conv3_3"),
    ("conv", "conv3_4"), ("pool", "pool3"),
    ("conv", "conv4_1"), ("conv", "conv4_2"), ("conv", "conv4_3"),
    ("conv", "conv4_4"), ("pool", "pool4"),
)

_DTYPES = {"single": torch.float32, "double": torch.float64}

# weights instance -> {precision: {conv name: (kernel, bias) tensors}}
_param_cache = weakref.WeakKeyDictionary()


def _torch_params(weights: NetworkWeights, precision: str) -> dict:
    per_instance = _param_cache.setdefault(weights, {})
    if precision not in per_instance:
        validate_weights(weights)
        dtype = _DTYPES[precision]
        per_instance[precision] = {
            name: (torch.from_numpy(weights[name].kernel).to(dtype),
                   torch.from_numpy(weights[name].bias).to(dtype))
            for name in CONV_NAMES
        }
    return per_instance[precision]


def _check_precision(precision: str) -> None:
    if precision not in _DTYPES:
        raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")


def preprocess(img: np.ndarray) -> np.ndarray:
    """Subtract the per-channel means. (H, W, 3) float64 in, same out."""
    validate_image(img, "image")
    return np.asarray(img, dtype=np.float64) - VGG_MEAN


def _check_layers(layers) -> tuple:
    layers = tuple(layers)
    if not layers:
        raise ValueError("at least one layer must be requested")
    for name in layers:
        if name not in LAYERS:
            raise ValueError(f"unknown layer {name!r}; known layers: {LAYERS}")
    return layers


def _input_tensor(img: np.ndarray, precision: str) -> torch.Tensor:
    validate_image(img, "image")
    h, w = img.shape[:2]
    if h < MIN_SIZE or w < MIN_SIZE:
        raise GeometryError(
            f"image too small: {h}x{w}, need at least {MIN_SIZE}x{MIN_SIZE}")
    pre = preprocess(img)
    return torch.from_numpy(pre).to(_DTYPES[precision])


def _run(x: torch.Tensor, params: dict, wanted) -> dict:
    """Run the schedule on a (1, 3, H, W) tensor, stopping after the deepest
    requested capture point. Returns {layer: (n_f, vs_f) tensor}."""
    feats = {}
    remaining = set(wanted)
    for kind, name in _SEQUENCE:
        if kind == "conv":
            kernel, bias = params[name]
            x = F.relu(F.conv2d(x, kernel, bias, padding=1))
        else:
            if kind == "pool":
                x = F.avg_pool2d(x, kernel_size=2, stride=2)
            if name in remaining:
                feats[name] = x.squeeze(0).flatten(1)
                remaining.discard(name)
                if not remaining:
                    break
    return feats


def forward_features(weights: NetworkWeights, img: np.ndarray, layers=LAYERS,
                     precision: str = "single") -> dict:
    """Extract feature maps as {layer: (n_f, vs_f) float64 array}.

    Rows are feature channels, columns the row-major flattened spatial
    positions. Only the requested layers are computed; the forward pass
    stops at the deepest one.
    """
    _check_precision(precision)
    layers = _check_layers(layers)
    params = _torch_params(weights, precision)
    x = _input_tensor(img, precision).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        feats = _run(x, params, layers)
    out = {}
    for name in layers:
        arr = feats[name].to(torch.float64).numpy()
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite activations in {name}")
        out[name] = arr
    return out


def input_gradient(weights: NetworkWeights, img: np.ndarray, scalar_fn,
                   layers=LAYERS, precision: str = "single") -> np.ndarray:
    """Gradient of scalar_fn(features) w.r.t. the image pixels.

    scalar_fn receives {layer: (n_f, vs_f) tensor} for the requested layers
    and must return a scalar built from differentiable operations on them.
    The result has the image's (H, W, 3) shape, float64.
    """
    _check_precision(precision)
    layers = _check_layers(layers)
    params = _torch_params(weights, precision)
    leaf = _input_tensor(img, precision)
    leaf.requires_grad_(True)
    x = leaf.permute(2, 0, 1).unsqueeze(0)
    feats = _run(x, params, layers)
    value = scalar_fn(feats)
    if not (torch.is_tensor(value) and value.dim() == 0):
        raise OptimizationError(
            "unsupported operation in scalar_fn: result is not a scalar tensor")
    if value.grad_fn is None:
        raise OptimizationError(
            "unsupported operation in scalar_fn: result does not depend on "
            "the features")
    value.backward()
    grad = leaf.grad.to(torch.float64).numpy()
    return grad
