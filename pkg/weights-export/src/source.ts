/**
 * Checkpoint intake: sniff the container format, find the 12 convolution
 * layers under whichever naming scheme the source uses, and canonicalize
 * kernels into [out, in, kh, kw] regardless of the stored layout.
 */

import * as fs from "node:fs";

import { CONV_PLAN, ConvTensors } from "./format.js";
import { parseNpy } from "./npy.js";
import { SourceTensor, parseSafetensors } from "./safetensors.js";
import { readZipEntries } from "./zip.js";

export type KernelLayout = "out-in-kh-kw" | "kh-kw-in-out";

export interface SourceLayer {
  tensors: ConvTensors;
  sourceKernelShape: number[];
}

export interface CheckpointContents {
  /** Canonical layer name -> canonicalized tensors. */
  layers: Map<string, SourceLayer>;
  /** Container format the source was recognized as. */
  container: "npz" | "safetensors";
  /** Naming scheme the 24 tensors were found under. */
  naming: string;
  /** Kernel layout detected in the source before transposition. */
  layout: KernelLayout;
}

/** Indices of the conv layers inside a torch VGG19 `features` Sequential. */
const TORCH_FEATURE_INDICES = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25];

interface NamingScheme {
  name: string;
  keys: (layer: string, index: number) => { kernel: string; bias: string };
}

const SCHEMES: NamingScheme[] = [
  {
    name: "canonical (conv1_1.kernel)",
    keys: (layer) => ({ kernel: `${layer}.kernel`, bias: `${layer}.bias` }),
  },
  {
    name: "torch features (features.0.weight)",
    keys: (_layer, index) => ({
      kernel: `features.${TORCH_FEATURE_INDICES[index]}.weight`,
      bias: `features.${TORCH_FEATURE_INDICES[index]}.bias`,
    }),
  },
  {
    name: "block names (block1_conv1_W)",
    keys: (layer) => {
      const m = /^conv(\d)_(\d)$/.exec(layer)!;
      const base = `block${m[1]}_conv${m[2]}`;
      return { kernel: `${base}_W`, bias: `${base}_b` };
    },
  },
];

function readRawTensors(path: string): {
  tensors: Map<string, SourceTensor>;
  container: "npz" | "safetensors";
} {
  const buf = fs.readFileSync(path);
  if (buf.length >= 4 && buf.toString("latin1", 0, 2) === "PK") {
    const members = readZipEntries(buf, path);
    const tensors = new Map<string, SourceTensor>();
    for (const [member, data] of members) {
      if (!member.endsWith(".npy")) {
        continue;
      }
      const key = member.slice(0, -4);
      tensors.set(key, parseNpy(data, `${path}:${member}`));
    }
    if (tensors.size === 0) {
      throw new Error(`${path}: zip archive holds no .npy members`);
    }
    return { tensors, container: "npz" };
  }
  if (buf.length >= 9) {
    const headerLen = Number(buf.readBigUInt64LE(0));
    if (headerLen > 0 && 8 + headerLen <= buf.length &&
        buf.toString("latin1", 8, 9) === "{") {
      return { tensors: parseSafetensors(buf, path), container: "safetensors" };
    }
  }
  throw new Error(
    `${path}: unrecognized checkpoint container (expected .npz or ` +
    `.safetensors)`,
  );
}

function detectScheme(tensors: Map<string, SourceTensor>): NamingScheme {
  let best: { scheme: NamingScheme; missing: string[] } | undefined;
  for (const scheme of SCHEMES) {
    const missing: string[] = [];
    CONV_PLAN.forEach(([layer], index) => {
      const { kernel, bias } = scheme.keys(layer, index);
      if (!tensors.has(kernel) || !tensors.has(bias)) {
        missing.push(layer);
      }
    });
    if (missing.length === 0) {
      return scheme;
    }
    if (!best || missing.length < best.missing.length) {
      best = { scheme, missing };
    }
  }
  if (best && best.missing.length < CONV_PLAN.length) {
    throw new Error(
      `missing layers under ${best.scheme.name} naming: ` +
      best.missing.join(", "),
    );
  }
  throw new Error(
    "no known naming scheme matches the checkpoint " +
    `(tried: ${SCHEMES.map((s) => s.name).join("; ")})`,
  );
}

function detectLayout(
  layer: string,
  inC: number,
  outC: number,
  shape: number[],
): KernelLayout {
  const text = `[${shape.join(", ")}]`;
  if (shape.length !== 4) {
    throw new Error(`unrecognized kernel layout for ${layer}: shape ${text}`);
  }
  const [a, b, c, d] = shape;
  if (a === outC && b === inC && c === 3 && d === 3) {
    return "out-in-kh-kw";
  }
  if (a === 3 && b === 3 && c === inC && d === outC) {
    return "kh-kw-in-out";
  }
  throw new Error(`unrecognized kernel layout for ${layer}: shape ${text}`);
}

/** Rearrange flat [kh, kw, in, out] values into [out, in, kh, kw]. */
function transposeToOutFirst(
  data: Float32Array,
  inC: number,
  outC: number,
): Float32Array {
  const out = new Float32Array(data.length);
  for (let kh = 0; kh < 3; kh += 1) {
    for (let kw = 0; kw < 3; kw += 1) {
      for (let i = 0; i < inC; i += 1) {
        const srcBase = ((kh * 3 + kw) * inC + i) * outC;
        const dstBase = (i * 3 + kh) * 3 + kw;
        for (let o = 0; o < outC; o += 1) {
          out[o * inC * 9 + dstBase] = data[srcBase + o];
        }
      }
    }
  }
  return out;
}

export function readCheckpoint(path: string): CheckpointContents {
  const { tensors, container } = readRawTensors(path);
  const scheme = detectScheme(tensors);

  let layout: KernelLayout | undefined;
  const layers = new Map<string, SourceLayer>();
  CONV_PLAN.forEach(([layer, inC, outC], index) => {
    const { kernel, bias } = scheme.keys(layer, index);
    const kernelTensor = tensors.get(kernel)!;
    const biasTensor = tensors.get(bias)!;

    const thisLayout = detectLayout(layer, inC, outC, kernelTensor.shape);
    if (layout === undefined) {
      layout = thisLayout;
    } else if (layout !== thisLayout) {
      throw new Error(
        `mixed kernel layouts: ${layer} is ${thisLayout}, ` +
        `earlier layers are ${layout}`,
      );
    }
    if (biasTensor.shape.length !== 1 || biasTensor.shape[0] !== outC) {
      throw new Error(
        `shape mismatch for ${layer} bias: expected [${outC}], ` +
        `got [${biasTensor.shape.join(", ")}]`,
      );
    }

    const kernelData = thisLayout === "out-in-kh-kw"
      ? kernelTensor.data
      : transposeToOutFirst(kernelTensor.data, inC, outC);
    layers.set(layer, {
      tensors: { kernel: kernelData, bias: biasTensor.data },
      sourceKernelShape: kernelTensor.shape,
    });
  });

  return { layers, container, naming: scheme.name, layout: layout! };
}
