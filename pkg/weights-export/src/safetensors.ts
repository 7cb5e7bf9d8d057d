/**
 * Minimal safetensors reader: u64 little-endian header length, JSON header
 * mapping tensor names to {dtype, shape, data_offsets}, then the packed
 * payload. Only F32 tensors are accepted.
 */

export interface SourceTensor {
  shape: number[];
  data: Float32Array;
}

export function parseSafetensors(
  buf: Buffer,
  name: string,
): Map<string, SourceTensor> {
  if (buf.length < 8) {
    throw new Error(`${name}: truncated safetensors file`);
  }
  const headerLen = Number(buf.readBigUInt64LE(0));
  if (8 + headerLen > buf.length) {
    throw new Error(`${name}: truncated safetensors header`);
  }
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(buf.toString("utf-8", 8, 8 + headerLen));
  } catch (err) {
    throw new Error(`${name}: unreadable safetensors header: ${err}`);
  }
  const dataStart = 8 + headerLen;

  const tensors = new Map<string, SourceTensor>();
  for (const [key, value] of Object.entries(header)) {
    if (key === "__metadata__") {
      continue;
    }
    const info = value as {
      dtype: string;
      shape: number[];
      data_offsets: [number, number];
    };
    if (info.dtype !== "F32") {
      throw new Error(`${name}: unsupported dtype ${info.dtype} for ${key}`);
    }
    const [start, end] = info.data_offsets;
    if (dataStart + end > buf.length || end < start) {
      throw new Error(`${name}: payload for ${key} out of bounds`);
    }
    const raw = new ArrayBuffer(end - start);
    new Uint8Array(raw).set(
      buf.subarray(dataStart + start, dataStart + end),
    );
    tensors.set(key, { shape: info.shape, data: new Float32Array(raw) });
  }
  return tensors;
}
