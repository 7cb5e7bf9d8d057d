"""Seamless texture tiling by deep Gram-statistics optimization.

Synthesizes tiles that continue a texture exemplar in any of the four
directions, expands canvases step by step, and fills missing regions, by
optimizing new pixels until their multi-layer Gram statistics match the
exemplar's.
"""

__version__ = "0.1.0"

from .engine import HoleSpec, TileRequest, expand, fill_hole, tile
from .errors import (DeeptileError, GeometryError, ImageIOError,
                     NonFiniteError, OptimizationError, WeightFormatError)
from .gram import LossConfig, gram_matrix, layer_loss, total_loss
from .image import (MergedCanvas, SeamNoiseConfig, TileGeometry, alpha_optimal,
                    build_merged_canvas, load_image, make_seam_init,
                    make_white_noise, save_image, seam_weight, tile_geometry)
from .optim import OptimConfig, OptimState, OptimTrace, adam_step, synthesize
from .weights import (NetworkWeights, load_weights, random_weights,
                      save_weights)

__all__ = [
    "DeeptileError", "GeometryError", "HoleSpec", "ImageIOError",
    "LossConfig", "MergedCanvas", "NetworkWeights", "NonFiniteError",
    "OptimConfig", "OptimState", "OptimTrace", "OptimizationError",
    "SeamNoiseConfig", "TileGeometry", "TileRequest", "WeightFormatError",
    "adam_step", "alpha_optimal", "build_merged_canvas", "expand",
    "fill_hole", "gram_matrix", "layer_loss", "load_image", "load_weights",
    "make_seam_init", "make_white_noise", "random_weights", "save_image",
    "save_weights", "seam_weight", "synthesize", "tile", "tile_geometry",
    "total_loss",
]
