/**
 * Minimal reader for the NumPy .npy array format (versions 1.0 and 2.0).
 *
 * Only little-endian float32/float64 C-order arrays are supported, which
 * covers every checkpoint dump this converter accepts; anything else is
 * rejected with a clear error rather than silently misread.
 */

export interface NpyArray {
  shape: number[];
  /** Values converted to float32 regardless of the stored precision. */
  data: Float32Array;
}

const NPY_MAGIC = "\x93NUMPY";

export function parseNpy(buf: Buffer, name: string): NpyArray {
  if (buf.length < 10 || buf.toString("latin1", 0, 6) !== NPY_MAGIC) {
    throw new Error(`${name}: not an .npy array`);
  }
  const major = buf.readUInt8(6);
  let headerLen: number;
  let headerStart: number;
  if (major === 1) {
    headerLen = buf.readUInt16LE(8);
    headerStart = 10;
  } else if (major === 2 || major === 3) {
    headerLen = buf.readUInt32LE(8);
    headerStart = 12;
  } else {
    throw new Error(`${name}: unsupported .npy version ${major}`);
  }
  const header = buf.toString("latin1", headerStart, headerStart + headerLen);

  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1];
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1];
  if (!descr || !fortran || shapeText === undefined) {
    throw new Error(`${name}: malformed .npy header`);
  }
  if (fortran === "True") {
    throw new Error(`${name}: Fortran-order arrays are not supported`);
  }
  const shape = shapeText
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number.parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const dataStart = headerStart + headerLen;

  const itemSize = descr === "<f4" ? 4 : descr === "<f8" ? 8 : 0;
  if (itemSize === 0) {
    throw new Error(`${name}: unsupported dtype ${descr}`);
  }
  if (buf.length < dataStart + count * itemSize) {
    throw new Error(`${name}: truncated .npy payload`);
  }
  // Copy into a fresh ArrayBuffer so the typed-array view is aligned and
  // detached from the (possibly pooled) source buffer.
  const raw = new ArrayBuffer(count * itemSize);
  new Uint8Array(raw).set(
    buf.subarray(dataStart, dataStart + count * itemSize),
  );
  const data = itemSize === 4
    ? new Float32Array(raw)
    : Float32Array.from(new Float64Array(raw));
  return { shape, data };
}
