/**
 * Orchestration: read a checkpoint, canonicalize it, emit the VGGW file,
 * and summarize what was written.
 */

import * as crypto from "node:crypto";
import * as fs from "node:fs";

import { ALIGN, CONV_PLAN, align, writeVggw } from "./format.js";
import { KernelLayout, readCheckpoint } from "./source.js";

export interface LayerReport {
  name: string;
  sourceShape: number[];
  emittedShape: number[];
  kernelMin: number;
  kernelMax: number;
  kernelMean: number;
}

export interface ExportReport {
  source: string;
  out: string;
  container: string;
  naming: string;
  sourceLayout: KernelLayout;
  layers: LayerReport[];
  /** SHA-256 over the tensor payload region (everything after the
   * 64-byte-aligned header). */
  payloadSha256: string;
  byteLength: number;
}

function kernelStats(values: Float32Array): {
  min: number;
  max: number;
  mean: number;
} {
  let min = Infinity;
  let max = -Infinity;
  let sum = 0; // float64 accumulator
  for (let i = 0; i < values.length; i += 1) {
    const v = values[i];
    if (v < min) min = v;
    if (v > max) max = v;
    sum += v;
  }
  return { min, max, mean: sum / values.length };
}

export function exportWeights(src: string, out: string): ExportReport {
  const checkpoint = readCheckpoint(src);

  const tensors = new Map(
    [...checkpoint.layers].map(([name, layer]) => [name, layer.tensors]),
  );
  const blob = writeVggw(tensors);
  fs.writeFileSync(out, blob);

  const headerLen = Number(blob.readBigUInt64LE(8));
  const payload = blob.subarray(align(16 + headerLen));

  const layers: LayerReport[] = CONV_PLAN.map(([name, inC, outC]) => {
    const layer = checkpoint.layers.get(name)!;
    const stats = kernelStats(layer.tensors.kernel);
    return {
      name,
      sourceShape: layer.sourceKernelShape,
      emittedShape: [outC, inC, 3, 3],
      kernelMin: stats.min,
      kernelMax: stats.max,
      kernelMean: stats.mean,
    };
  });

  return {
    source: src,
    out,
    container: checkpoint.container,
    naming: checkpoint.naming,
    sourceLayout: checkpoint.layout,
    layers,
    payloadSha256: crypto.createHash("sha256").update(payload).digest("hex"),
    byteLength: blob.length,
  };
}

export function formatReport(report: ExportReport): string {
  const lines: string[] = [];
  lines.push(`source:    ${report.source} (${report.container}, ` +
             `${report.naming})`);
  lines.push(`layout:    ${report.sourceLayout} -> out-in-kh-kw`);
  lines.push(`output:    ${report.out} (${report.byteLength} bytes, ` +
             `${ALIGN}-byte aligned payloads)`);
  lines.push(`payload:   sha256 ${report.payloadSha256}`);
  for (const layer of report.layers) {
    lines.push(
      `  ${layer.name.padEnd(8)} ` +
      `[${layer.sourceShape.join(",")}] -> ` +
      `[${layer.emittedShape.join(",")}]  ` +
      `min ${layer.kernelMin.toExponential(3)}  ` +
      `max ${layer.kernelMax.toExponential(3)}  ` +
      `mean ${layer.kernelMean.toExponential(3)}`,
    );
  }
  return lines.join("\n");
}
