/**
 * Writer for the portable VGGW weight container.
 *
 * Layout:
 *   - magic bytes "VGGW"
 *   - version, u32 little-endian (currently 1)
 *   - header length, u64 little-endian
 *   - UTF-8 JSON manifest: a list of
 *     {name, dtype: "f32", shape, offset, byte_length} entries
 *   - tensor payloads: raw little-endian float32, row-major, kernels
 *     laid out [out_channels, in_channels, kh, kw]
 *
 * Payloads start at the first 64-byte-aligned offset after the manifest;
 * each entry's offset is relative to that payload start and is itself a
 * multiple of 64. The kernel and bias of layer conv2_1 are named
 * "conv2_1.kernel" and "conv2_1.bias". The writer is byte-for-byte
 * deterministic: entries appear in network order (kernel before bias),
 * each manifest object serializes its keys alphabetically with no
 * whitespace, and no padding follows the final tensor.
 */

export const MAGIC = "VGGW";
export const VERSION = 1;
export const ALIGN = 64;

/** [layer name, in_channels, out_channels] for the 12 convolutions of
 * VGG19 blocks 1-4, in network order. */
export const CONV_PLAN: ReadonlyArray<readonly [string, number, number]> = [
  ["conv1_1", 3, 64],
  ["conv1_2", 64, 64],
  ["conv2_1", 64, 128],
  ["conv2_2", 128, 128],
  ["conv3_1", 128, 256],
  ["conv3_2", 256, 256],
  ["conv3_3", 256, 256],
  ["conv3_4", 256, 256],
  ["conv4_1", 256, 512],
  ["conv4_2", 512, 512],
  ["conv4_3", 512, 512],
  ["conv4_4", 512, 512],
];

export interface ConvTensors {
  /** Flat kernel values in [out, in, kh, kw] row-major order. */
  kernel: Float32Array;
  /** Bias values, length out_channels. */
  bias: Float32Array;
}

export function align(offset: number): number {
  return Math.ceil(offset / ALIGN) * ALIGN;
}

function manifestEntry(
  name: string,
  shape: number[],
  offset: number,
  byteLength: number,
): Record<string, unknown> {
  // Insertion order is serialization order; keep keys alphabetical so the
  // JSON matches a sorted-key writer byte-for-byte.
  return {
    byte_length: byteLength,
    dtype: "f32",
    name,
    offset,
    shape,
  };
}

/**
 * Serialize all 12 layers into a VGGW buffer. Layers must be complete and
 * exactly shaped; callers are expected to have canonicalized them first.
 */
export function writeVggw(layers: Map<string, ConvTensors>): Buffer {
  const entries: Record<string, unknown>[] = [];
  const chunks: Buffer[] = [];
  const offsets: number[] = [];
  let offset = 0;
  for (const [name, inC, outC] of CONV_PLAN) {
    const conv = layers.get(name);
    if (!conv) {
      throw new Error(`missing layer: ${name}`);
    }
    const kernelCount = outC * inC * 3 * 3;
    if (conv.kernel.length !== kernelCount) {
      throw new Error(
        `shape mismatch for ${name} kernel: expected ${kernelCount} values, ` +
        `got ${conv.kernel.length}`,
      );
    }
    if (conv.bias.length !== outC) {
      throw new Error(
        `shape mismatch for ${name} bias: expected ${outC} values, ` +
        `got ${conv.bias.length}`,
      );
    }
    const parts: Array<[string, number[], Float32Array]> = [
      [`${name}.kernel`, [outC, inC, 3, 3], conv.kernel],
      [`${name}.bias`, [outC], conv.bias],
    ];
    for (const [entryName, shape, values] of parts) {
      const data = Buffer.from(
        values.buffer, values.byteOffset, values.byteLength,
      );
      entries.push(manifestEntry(entryName, shape, offset, data.length));
      chunks.push(data);
      offsets.push(offset);
      offset = align(offset + data.length);
    }
  }

  const manifest = Buffer.from(JSON.stringify(entries), "utf-8");
  const header = Buffer.alloc(16);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeBigUInt64LE(BigInt(manifest.length), 8);

  const payloadStart = align(16 + manifest.length);
  const last = chunks.length - 1;
  const total = payloadStart + offsets[last] + chunks[last].length;
  const out = Buffer.alloc(total); // zero-filled: padding comes for free
  header.copy(out, 0);
  manifest.copy(out, 16);
  for (let i = 0; i < chunks.length; i += 1) {
    chunks[i].copy(out, payloadStart + offsets[i]);
  }
  return out;
}
