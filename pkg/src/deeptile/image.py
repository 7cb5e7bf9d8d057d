"""Image representation, PNG I/O, tile geometry, and tile initializers.

Images are numpy arrays of shape (height, width, 3), float64, RGB channel
order, with values in display range [0, 255]. All functions here are pure:
inputs are never mutated and outputs are freshly allocated.

Contents:
  - load_image / save_image: exact 8/16-bit PNG decode, clamped 8-bit encode.
  - make_white_noise: uniform [0, 255) noise from a seeded Philox generator.
  - alpha_optimal / seam_weight: the exponential seam-attenuation law.
  - make_seam_init: mirrored-exemplar tile initializer with exponential
    blend toward random color.
  - tile_geometry / build_merged_canvas: canvas concatenation and the
    fixed-pixel mask.

Randomness: every stochastic function takes an explicit 64-bit seed and
draws from numpy's counter-based Philox generator, so outputs are
bit-reproducible across runs and platforms.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import GeometryError, ImageIOError, NonFiniteError

DIRECTIONS = ("up", "down", "left", "right")

# PNG color types (IHDR byte 25).
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_COLOR_GRAY = 0
_COLOR_RGB = 2
_COLOR_PALETTE = 3
_COLOR_GRAY_ALPHA = 4
_COLOR_RGBA = 6


@dataclass(frozen=True)
class TileGeometry:
    """Shape and placement of a tile relative to its exemplar.

    ``seam_axis`` is the index of the first row/column after the seam along
    the concatenation axis of the merged canvas.
    """

    direction: str
    factor_w: float
    factor_h: float
    tile_height: int
    tile_width: int
    seam_axis: int


@dataclass(frozen=True)
class SeamNoiseConfig:
    """Parameters of the seam-removal initializer.

    ``c`` is the exemplar's extent perpendicular to the seam, the quantity
    the optimal attenuation formula is based on.
    """

    alpha: float
    seed: int
    c: int


@dataclass
class MergedCanvas:
    """Exemplar plus tile in one image, with the exemplar pixels flagged.

    ``fixed_mask`` is a (height, width) boolean array; True marks pixels
    that belong to the exemplar/context and must never change. ``geometry``
    is the TileGeometry for directional tiling, or a hole descriptor for
    fill jobs.
    """

    image: np.ndarray
    fixed_mask: np.ndarray
    geometry: object = None


def validate_image(img: np.ndarray, name: str = "image") -> None:
    """Check the (H, W, 3) shape, minimum size, and finiteness invariants."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ImageIOError(f"{name} must be an (H, W, 3) array, got shape "
                           f"{getattr(img, 'shape', None)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise GeometryError(f"{name} must be at least 1x1")
    if not np.isfinite(img).all():
        raise NonFiniteError(f"non-finite values in {name}")


def _read_png_header(path: Path) -> tuple[int, int]:
    """Return (bit_depth, color_type) from the IHDR chunk."""
    try:
        with open(path, "rb") as f:
            head = f.read(26)
    except FileNotFoundError:
        raise
    if len(head) < 26 or head[:8] != _PNG_MAGIC:
        raise ImageIOError(f"unsupported format (not a PNG): {path}")
    length, chunk = struct.unpack(">I4s", head[8:16])
    if chunk != b"IHDR" or length != 13:
        raise ImageIOError(f"corrupt PNG header: {path}")
    bit_depth, color_type = head[24], head[25]
    return bit_depth, color_type


def load_image(path: str | Path) -> np.ndarray:
    """Decode an 8- or 16-bit RGB/RGBA PNG to a float64 RGB image in [0, 255].

    8-bit samples map to [0, 255] exactly; 16-bit samples are rescaled by
    255/65535. An alpha channel is dropped. Grayscale input is rejected.
    """
    path = Path(path)
    bit_depth, color_type = _read_png_header(path)
    if color_type in (_COLOR_GRAY, _COLOR_GRAY_ALPHA):
        raise ImageIOError(f"rgb-required: {path} is grayscale")
    if color_type not in (_COLOR_RGB, _COLOR_RGBA):
        raise ImageIOError(f"unsupported format: {path} has PNG color type "
                           f"{color_type}; only RGB/RGBA is supported")
    if bit_depth not in (8, 16):
        raise ImageIOError(f"unsupported format: {path} has bit depth {bit_depth}")

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"failed to decode PNG: {path}")
    if raw.ndim != 3 or raw.shape[2] not in (3, 4):
        raise ImageIOError(f"unsupported format: {path} decoded to shape {raw.shape}")

    rgb = raw[:, :, 2::-1] if raw.shape[2] == 4 else raw[:, :, ::-1]
    img = rgb.astype(np.float64)
    if raw.dtype == np.uint16:
        img *= 255.0 / 65535.0
    validate_image(img, str(path))
    return img


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Encode an image as 8-bit RGB PNG.

    Values are clamped to [0, 255], then rounded half-away-from-zero.
    """
    validate_image(img)
    data = to_uint8(img)
    ok = cv2.imwrite(str(path), data[:, :, ::-1])
    if not ok:
        raise ImageIOError(f"failed to write PNG: {path}")


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half-away-from-zero to uint8."""
    if not np.isfinite(img).all():
        raise NonFiniteError("non-finite values in image data")
    # After clamping all values are >= 0, so half-away-from-zero == floor(x+0.5).
    return np.floor(np.clip(img, 0.0, 255.0) + 0.5).astype(np.uint8)


def make_white_noise(height: int, width: int, seed: int) -> np.ndarray:
    """Per-channel independent uniform [0, 255) noise image.

    Drawn from numpy's Philox counter-based generator keyed by ``seed``,
    so equal seeds give bit-identical images.
    """
    if height < 1 or width < 1:
        raise GeometryError(f"noise dimensions must be >= 1, got {height}x{width}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.uniform(0.0, 255.0, size=(height, width, 3))


def alpha_optimal(c: int) -> float:
    """Attenuation coefficient giving 50% mirror weight at j = c/50.

    Returns 50*ln(2)/c. If that is >= 1 (very narrow exemplars) the value
    is clamped to 0.999 with a warning, keeping alpha inside (0, 1).
    """
    if c < 1:
        raise GeometryError(f"exemplar extent must be >= 1, got {c}")
    alpha = 50.0 * np.log(2.0) / float(c)
    if alpha >= 1.0:
        warnings.warn(
            f"optimal alpha {alpha:.3f} for extent {c} falls outside (0, 1); "
            "clamping to 0.999", stacklevel=2)
        return 0.999
    return float(alpha)


def seam_weight(alpha: float, j):
    """Mirror weight w1 = exp(-alpha*j) at perpendicular distance j.

    ``j`` may be a scalar or array; j = 0 is the tile pixel adjacent to the
    seam. The complementary noise weight is 1 - w1.
    """
    return np.exp(-alpha * np.asarray(j, dtype=np.float64))


def _reflect_indices(j: np.ndarray, extent: int) -> np.ndarray:
    """Triangle-wave index map: 0,1,..,extent-1,extent-1,..,1,0,0,1,.."""
    m = j % (2 * extent)
    return np.where(m < extent, m, 2 * extent - 1 - m)


def _to_right_frame(img: np.ndarray, direction: str) -> np.ndarray:
    # Orient so the seam is at the exemplar's right edge and j grows
    # with the column index.
    if direction == "right":
        return img
    if direction == "left":
        return img[:, ::-1]
    if direction == "down":
        return np.swapaxes(img, 0, 1)
    return np.swapaxes(img[::-1], 0, 1)  # up


def _from_right_frame(img: np.ndarray, direction: str) -> np.ndarray:
    if direction == "right":
        return img
    if direction == "left":
        return img[:, ::-1]
    if direction == "down":
        return np.swapaxes(img, 0, 1)
    return np.swapaxes(img, 0, 1)[::-1]  # up


def make_seam_init(original: np.ndarray, geometry: TileGeometry,
                   cfg: SeamNoiseConfig) -> np.ndarray:
    """Tile initializer: exponentially attenuated exemplar mirror over noise.

    Each tile pixel at perpendicular distance j from the seam gets
    w1*mirror + (1-w1)*noise with w1 = exp(-alpha*j), where ``mirror``
    reflects the exemplar across the seam (repeated reflection past the
    exemplar's extent) and ``noise`` is the Philox field of
    ``make_white_noise(tile_height, tile_width, cfg.seed)``. All four
    directions reduce to the right-tiling case by flips/transposition, so
    a single code path produces the seam.
    """
    validate_image(original, "original")
    if geometry.direction not in DIRECTIONS:
        raise GeometryError(f"unknown direction: {geometry.direction!r}")
    if not 0.0 < cfg.alpha < 1.0:
        raise GeometryError(f"alpha must be in (0, 1), got {cfg.alpha}")
    h, w = original.shape[:2]
    if geometry.direction in ("left", "right"):
        if geometry.tile_height != h:
            raise GeometryError(
                f"inconsistent geometry: tile height {geometry.tile_height} "
                f"!= exemplar height {h} for {geometry.direction} tiling")
        perp = geometry.tile_width
    else:
        if geometry.tile_width != w:
            raise GeometryError(
                f"inconsistent geometry: tile width {geometry.tile_width} "
                f"!= exemplar width {w} for {geometry.direction} tiling")
        perp = geometry.tile_height
    if perp < 1:
        raise GeometryError("tile extent perpendicular to the seam must be >= 1")

    noise = make_white_noise(geometry.tile_height, geometry.tile_width, cfg.seed)
    exemplar = _to_right_frame(original, geometry.direction)
    noise_r = _to_right_frame(noise, geometry.direction)

    extent = exemplar.shape[1]
    j = np.arange(perp)
    w1 = seam_weight(cfg.alpha, j)[np.newaxis, :, np.newaxis]
    source_cols = extent - 1 - _reflect_indices(j, extent)
    mirror = exemplar[:, source_cols, :]
    tile_r = w1 * mirror + (1.0 - w1) * noise_r
    return np.ascontiguousarray(_from_right_frame(tile_r, geometry.direction))


def _round_half_away(x: float) -> int:
    return int(np.floor(abs(x) + 0.5) * np.sign(x)) if x else 0


def tile_geometry(height: int, width: int, direction: str,
                  factor_w: float = 1.0, factor_h: float = 1.0) -> TileGeometry:
    """Tile dimensions for an exemplar of the given size.

    The dimension along the tiling direction is factor * exemplar dimension
    rounded half-away-from-zero (minimum 1); the seam-parallel dimension
    equals the exemplar's.
    """
    if direction not in DIRECTIONS:
        raise GeometryError(f"unknown direction: {direction!r}")
    if factor_w <= 0 or factor_h <= 0:
        raise GeometryError(f"tiling factors must be > 0, got "
                            f"({factor_w}, {factor_h})")
    if direction in ("left", "right"):
        tile_w = max(1, _round_half_away(factor_w * width))
        tile_h = height
        seam_axis = width if direction == "right" else tile_w
    else:
        tile_h = max(1, _round_half_away(factor_h * height))
        tile_w = width
        seam_axis = height if direction == "down" else tile_h
    return TileGeometry(direction, factor_w, factor_h, tile_h, tile_w, seam_axis)


def build_merged_canvas(original: np.ndarray, tile_init: np.ndarray,
                        direction: str) -> MergedCanvas:
    """Concatenate exemplar and tile along ``direction``.

    The tile goes on the side named by the direction (right: [original |
    tile], up: [tile / original], ...). The fixed mask is True exactly on
    the exemplar's region.
    """
    validate_image(original, "original")
    validate_image(tile_init, "tile_init")
    if direction not in DIRECTIONS:
        raise GeometryError(f"unknown direction: {direction!r}")
    h, w = original.shape[:2]
    th, tw = tile_init.shape[:2]
    if direction in ("left", "right") and th != h:
        raise GeometryError(f"seam dimension mismatch: tile height {th} != "
                            f"exemplar height {h}")
    if direction in ("up", "down") and tw != w:
        raise GeometryError(f"seam dimension mismatch: tile width {tw} != "
                            f"exemplar width {w}")

    if direction == "right":
        image = np.hstack([original, tile_init])
        fixed = np.zeros(image.shape[:2], dtype=bool)
        fixed[:, :w] = True
    elif direction == "left":
        image = np.hstack([tile_init, original])
        fixed = np.zeros(image.shape[:2], dtype=bool)
        fixed[:, tw:] = True
    elif direction == "down":
        image = np.vstack([original, tile_init])
        fixed = np.zeros(image.shape[:2], dtype=bool)
        fixed[:h, :] = True
    else:  # up
        image = np.vstack([tile_init, original])
        fixed = np.zeros(image.shape[:2], dtype=bool)
        fixed[th:, :] = True

    geometry = TileGeometry(
        direction=direction,
        factor_w=tw / w if direction in ("left", "right") else 1.0,
        factor_h=th / h if direction in ("up", "down") else 1.0,
        tile_height=th, tile_width=tw,
        seam_axis={"right": w, "left": tw, "down": h, "up": th}[direction],
    )
    return MergedCanvas(image=image, fixed_mask=fixed, geometry=geometry)
