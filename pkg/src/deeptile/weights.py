"""Network weights: the portable weight file format and random initialization.

The extractor uses the 12 convolution layers of VGG19 blocks 1-4. Weights
travel in a self-describing binary container:

  - magic bytes ``VGGW``
  - version, u32 little-endian (currently 1)
  - header length, u64 little-endian
  - UTF-8 JSON manifest: a list of
    ``{name, dtype: "f32", shape: [...], offset, byte_length}`` entries
  - tensor payloads: raw little-endian IEEE-754 float32, row-major,
    kernels laid out [out_channels, in_channels, kh, kw]

Payloads start at the first 64-byte-aligned file offset after the manifest;
each entry's ``offset`` is relative to that payload start and is itself a
multiple of 64. Kernel and bias of layer ``conv2_1`` are named
``conv2_1.kernel`` and ``conv2_1.bias``. Unknown entries are ignored.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import WeightFormatError

MAGIC = b"VGGW"
VERSION = 1
_ALIGN = 64

# (layer name, in_channels, out_channels) for VGG19 blocks 1-4.
CONV_PLAN = (
    ("conv1_1", 3, 64), ("conv1_2", 64, 64),
    ("conv2_1", 64, 128), ("conv2_2", 128, 128),
    ("conv3_1", 128, 256), ("conv3_2", 256, 256),
    ("conv3_3", 256, 256), ("conv3_4", 256, 256),
    ("conv4_1", 256, 512), ("conv4_2", 512, 512),
    ("conv4_3", 512, 512), ("conv4_4", 512, 512),
)

CONV_NAMES = tuple(name for name, _, _ in CONV_PLAN)


@dataclass(eq=False)
class ConvParams:
    kernel: np.ndarray  # (out, in, 3, 3) float32
    bias: np.ndarray    # (out,) float32


@dataclass(eq=False)
class NetworkWeights:
    """Immutable parameter set for the 12-conv extractor, keyed by layer name."""

    convs: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> ConvParams:
        return self.convs[name]


def _expected_shapes(name: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    for layer, in_c, out_c in CONV_PLAN:
        if layer == name:
            return (out_c, in_c, 3, 3), (out_c,)
    raise KeyError(name)


def validate_weights(weights: NetworkWeights) -> None:
    """Check presence, exact shapes, and finiteness of all 12 layers."""
    for name, in_c, out_c in CONV_PLAN:
        if name not in weights.convs:
            raise WeightFormatError(f"missing layer: {name}")
        params = weights.convs[name]
        k_shape, b_shape = (out_c, in_c, 3, 3), (out_c,)
        if tuple(params.kernel.shape) != k_shape:
            raise WeightFormatError(
                f"shape mismatch for {name} kernel: expected {k_shape}, "
                f"got {tuple(params.kernel.shape)}")
        if tuple(params.bias.shape) != b_shape:
            raise WeightFormatError(
                f"shape mismatch for {name} bias: expected {b_shape}, "
                f"got {tuple(params.bias.shape)}")
        if not np.isfinite(params.kernel).all():
            raise WeightFormatError(f"non-finite value in {name} kernel")
        if not np.isfinite(params.bias).all():
            raise WeightFormatError(f"non-finite value in {name} bias")


def _align(offset: int) -> int:
    return (offset + _ALIGN - 1) // _ALIGN * _ALIGN


def load_weights(path) -> NetworkWeights:
    """Read a portable weight file, validating the full 12-layer plan."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise WeightFormatError(f"corrupt header: bad magic in {path}")
    version, header_len = struct.unpack("<IQ", blob[4:16])
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version} in {path}")
    if 16 + header_len > len(blob):
        raise WeightFormatError(f"corrupt header: truncated manifest in {path}")
    try:
        manifest = json.loads(blob[16:16 + header_len].decode("utf-8"))
        entries = {e["name"]: e for e in manifest}
    except (ValueError, KeyError, TypeError) as exc:
        raise WeightFormatError(f"corrupt header: unreadable manifest in {path}: "
                                f"{exc}") from exc
    payload = blob[_align(16 + header_len):]

    def read_tensor(name: str, shape: tuple[int, ...]) -> np.ndarray:
        entry = entries.get(name)
        if entry is None:
            raise WeightFormatError(f"missing layer: {name}")
        if entry.get("dtype") != "f32":
            raise WeightFormatError(
                f"unsupported dtype {entry.get('dtype')!r} for {name}")
        got = tuple(int(d) for d in entry["shape"])
        if got != shape:
            layer, kind = name.rsplit(".", 1)
            raise WeightFormatError(
                f"shape mismatch for {layer} {kind}: expected {shape}, got {got}")
        offset, nbytes = int(entry["offset"]), int(entry["byte_length"])
        count = int(np.prod(shape))
        if nbytes != count * 4:
            raise WeightFormatError(
                f"byte length {nbytes} for {name} does not match shape {shape}")
        if offset % _ALIGN != 0:
            raise WeightFormatError(f"payload for {name} not {_ALIGN}-byte aligned")
        if offset + nbytes > len(payload):
            raise WeightFormatError(f"payload for {name} out of bounds")
        data = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        return data.reshape(shape).copy()

    convs = {}
    for name, in_c, out_c in CONV_PLAN:
        kernel = read_tensor(f"{name}.kernel", (out_c, in_c, 3, 3))
        bias = read_tensor(f"{name}.bias", (out_c,))
        convs[name] = ConvParams(kernel=kernel, bias=bias)
    weights = NetworkWeights(convs=convs)
    validate_weights(weights)
    return weights


def save_weights(weights: NetworkWeights, path) -> None:
    """Write the portable weight format. Byte-for-byte deterministic."""
    validate_weights(weights)
    entries = []
    chunks = []
    offset = 0
    for name, _, _ in CONV_PLAN:
        params = weights.convs[name]
        for kind, array in (("kernel", params.kernel), ("bias", params.bias)):
            data = np.ascontiguousarray(array, dtype="<f4").tobytes()
            entries.append({
                "name": f"{name}.{kind}",
                "dtype": "f32",
                "shape": list(array.shape),
                "offset": offset,
                "byte_length": len(data),
            })
            chunks.append(data)
            offset = _align(offset + len(data))
    manifest = json.dumps(entries, sort_keys=True, separators=(",", ":")).encode()
    header = MAGIC + struct.pack("<IQ", VERSION, len(manifest)) + manifest
    with open(path, "wb") as f:
        f.write(header)
        f.write(b"\x00" * (_align(len(header)) - len(header)))
        pos = 0
        for entry, data in zip(entries, chunks):
            f.write(b"\x00" * (entry["offset"] - pos))
            f.write(data)
            pos = entry["offset"] + len(data)


def random_weights(seed: int) -> NetworkWeights:
    """He-initialized random weights, deterministic per seed.

    Kernels are zero-mean normal with std sqrt(2/(in_channels*9)); biases
    are zero. Useful for testing the pipeline without a pretrained file.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    convs = {}
    for name, in_c, out_c in CONV_PLAN:
        std = np.sqrt(2.0 / (in_c * 9))
        kernel = rng.normal(0.0, std, size=(out_c, in_c, 3, 3)).astype(np.float32)
        bias = np.zeros(out_c, dtype=np.float32)
        convs[name] = ConvParams(kernel=kernel, bias=bias)
    return NetworkWeights(convs=convs)
