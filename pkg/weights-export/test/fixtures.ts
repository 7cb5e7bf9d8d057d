/**
 * Deterministic in-memory checkpoint builders for the test suite:
 * seeded pseudo-random tensors plus minimal .npy/.npz/.safetensors
 * writers (the package itself only ever reads these formats).
 */

import * as zlib from "node:zlib";

import { CONV_PLAN } from "../src/format.js";

/** Small deterministic PRNG (mulberry32) returning floats in [-1, 1). */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return (((t ^ (t >>> 14)) >>> 0) / 2147483648) - 1;
  };
}

export interface FixtureTensor {
  shape: number[];
  data: Float32Array;
}

/** Canonical random weights for all 12 layers, kernels in [out,in,kh,kw]. */
export function makeCanonicalFixture(
  seed: number,
): Map<string, { kernel: FixtureTensor; bias: FixtureTensor }> {
  const rng = makeRng(seed);
  const layers = new Map<
    string, { kernel: FixtureTensor; bias: FixtureTensor }
  >();
  for (const [name, inC, outC] of CONV_PLAN) {
    const kernel = new Float32Array(outC * inC * 9);
    for (let i = 0; i < kernel.length; i += 1) {
      kernel[i] = Math.fround(rng() * 0.5);
    }
    const bias = new Float32Array(outC);
    for (let i = 0; i < bias.length; i += 1) {
      bias[i] = Math.fround(rng() * 0.1);
    }
    layers.set(name, {
      kernel: { shape: [outC, inC, 3, 3], data: kernel },
      bias: { shape: [outC], data: bias },
    });
  }
  return layers;
}

/** Rearrange a canonical [out,in,kh,kw] kernel into [kh,kw,in,out]. */
export function toHwio(kernel: FixtureTensor): FixtureTensor {
  const [outC, inC] = kernel.shape;
  const data = new Float32Array(kernel.data.length);
  for (let o = 0; o < outC; o += 1) {
    for (let i = 0; i < inC; i += 1) {
      for (let kh = 0; kh < 3; kh += 1) {
        for (let kw = 0; kw < 3; kw += 1) {
          data[((kh * 3 + kw) * inC + i) * outC + o] =
            kernel.data[((o * inC + i) * 3 + kh) * 3 + kw];
        }
      }
    }
  }
  return { shape: [3, 3, inC, outC], data };
}

export function makeNpy(tensor: FixtureTensor, descr = "<f4"): Buffer {
  const shapeText = tensor.shape.length === 1
    ? `(${tensor.shape[0]},)`
    : `(${tensor.shape.join(", ")})`;
  let header =
    `{'descr': '${descr}', 'fortran_order': False, ` +
    `'shape': ${shapeText}, }`;
  const unpadded = 10 + header.length + 1;
  header += " ".repeat((64 - (unpadded % 64)) % 64) + "\n";

  const head = Buffer.alloc(10);
  head.write("\x93NUMPY", 0, "latin1");
  head.writeUInt8(1, 6);
  head.writeUInt8(0, 7);
  head.writeUInt16LE(header.length, 8);

  let body: Buffer;
  if (descr === "<f4") {
    body = Buffer.from(
      tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength,
    );
  } else if (descr === "<f8") {
    const doubles = Float64Array.from(tensor.data);
    body = Buffer.from(doubles.buffer, 0, doubles.byteLength);
  } else {
    throw new Error(`fixture cannot write dtype ${descr}`);
  }
  return Buffer.concat([head, Buffer.from(header, "latin1"), body]);
}

/** Assemble a stored (or deflated) zip archive from named members. */
export function makeZip(
  members: Map<string, Buffer>,
  deflate = false,
): Buffer {
  const locals: Buffer[] = [];
  const centrals: Buffer[] = [];
  let offset = 0;
  for (const [name, data] of members) {
    const stored = deflate ? zlib.deflateRawSync(data) : data;
    const method = deflate ? 8 : 0;
    const crc = zlib.crc32(data);
    const nameBuf = Buffer.from(name, "utf-8");

    const local = Buffer.alloc(30 + nameBuf.length);
    local.writeUInt32LE(0x04034b50, 0);
    local.writeUInt16LE(20, 4);
    local.writeUInt16LE(method, 8);
    local.writeUInt32LE(crc, 14);
    local.writeUInt32LE(stored.length, 18);
    local.writeUInt32LE(data.length, 22);
    local.writeUInt16LE(nameBuf.length, 26);
    nameBuf.copy(local, 30);
    locals.push(local, stored);

    const central = Buffer.alloc(46 + nameBuf.length);
    central.writeUInt32LE(0x02014b50, 0);
    central.writeUInt16LE(20, 4);
    central.writeUInt16LE(20, 6);
    central.writeUInt16LE(method, 10);
    central.writeUInt32LE(crc, 16);
    central.writeUInt32LE(stored.length, 20);
    central.writeUInt32LE(data.length, 24);
    central.writeUInt16LE(nameBuf.length, 28);
    central.writeUInt32LE(offset, 42);
    nameBuf.copy(central, 46);
    centrals.push(central);

    offset += local.length + stored.length;
  }
  const centralStart = offset;
  const centralSize = centrals.reduce((n, b) => n + b.length, 0);
  const eocd = Buffer.alloc(22);
  eocd.writeUInt32LE(0x06054b50, 0);
  eocd.writeUInt16LE(members.size, 8);
  eocd.writeUInt16LE(members.size, 10);
  eocd.writeUInt32LE(centralSize, 12);
  eocd.writeUInt32LE(centralStart, 16);
  return Buffer.concat([...locals, ...centrals, eocd]);
}

export function makeNpz(
  tensors: Map<string, FixtureTensor>,
  deflate = false,
): Buffer {
  const members = new Map<string, Buffer>();
  for (const [name, tensor] of tensors) {
    members.set(`${name}.npy`, makeNpy(tensor));
  }
  return makeZip(members, deflate);
}

export function makeSafetensors(
  tensors: Map<string, FixtureTensor>,
): Buffer {
  const header: Record<string, unknown> = {};
  const bodies: Buffer[] = [];
  let offset = 0;
  for (const [name, tensor] of tensors) {
    const body = Buffer.from(
      tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength,
    );
    header[name] = {
      dtype: "F32",
      shape: tensor.shape,
      data_offsets: [offset, offset + body.length],
    };
    bodies.push(body);
    offset += body.length;
  }
  const headerBuf = Buffer.from(JSON.stringify(header), "utf-8");
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(headerBuf.length), 0);
  return Buffer.concat([prefix, headerBuf, ...bodies]);
}

/** Keys for the three naming schemes the reader understands. */
export const TORCH_INDICES = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25];

export function fixtureAs(
  layers: Map<string, { kernel: FixtureTensor; bias: FixtureTensor }>,
  naming: "canonical" | "torch" | "block",
  layout: "oihw" | "hwio" = "oihw",
): Map<string, FixtureTensor> {
  const tensors = new Map<string, FixtureTensor>();
  [...layers.entries()].forEach(([name, layer], index) => {
    const kernel = layout === "oihw" ? layer.kernel : toHwio(layer.kernel);
    let kernelKey: string;
    let biasKey: string;
    if (naming === "canonical") {
      kernelKey = `${name}.kernel`;
      biasKey = `${name}.bias`;
    } else if (naming === "torch") {
      kernelKey = `features.${TORCH_INDICES[index]}.weight`;
      biasKey = `features.${TORCH_INDICES[index]}.bias`;
    } else {
      const m = /^conv(\d)_(\d)$/.exec(name)!;
      kernelKey = `block${m[1]}_conv${m[2]}_W`;
      biasKey = `block${m[1]}_conv${m[2]}_b`;
    }
    tensors.set(kernelKey, kernel);
    tensors.set(biasKey, layer.bias);
  });
  return tensors;
}
