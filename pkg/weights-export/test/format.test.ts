import { describe, expect, it } from "vitest";

import { ALIGN, CONV_PLAN, align, writeVggw } from "../src/format.js";
import { makeCanonicalFixture } from "./fixtures.js";

function fixtureTensors() {
  return new Map(
    [...makeCanonicalFixture(7)].map(([name, layer]) => [
      name,
      { kernel: layer.kernel.data, bias: layer.bias.data },
    ]),
  );
}

describe("align", () => {
  it("rounds up to the 64-byte grid", () => {
    expect(align(0)).toBe(0);
    expect(align(1)).toBe(64);
    expect(align(64)).toBe(64);
    expect(align(65)).toBe(128);
  });
});

describe("writeVggw", () => {
  const blob = writeVggw(fixtureTensors());

  it("emits magic, version, and a parseable manifest", () => {
    expect(blob.toString("ascii", 0, 4)).toBe("VGGW");
    expect(blob.readUInt32LE(4)).toBe(1);
    const headerLen = Number(blob.readBigUInt64LE(8));
    const manifest = JSON.parse(blob.toString("utf-8", 16, 16 + headerLen));
    expect(manifest).toHaveLength(24);
    const names = manifest.map((e: { name: string }) => e.name);
    expect(names[0]).toBe("conv1_1.kernel");
    expect(names[1]).toBe("conv1_1.bias");
    expect(names[23]).toBe("conv4_4.bias");
  });

  it("serializes manifest objects with alphabetical keys, no spaces", () => {
    const headerLen = Number(blob.readBigUInt64LE(8));
    const text = blob.toString("utf-8", 16, 16 + headerLen);
    expect(text.startsWith(
      '[{"byte_length":6912,"dtype":"f32","name":"conv1_1.kernel",' +
      '"offset":0,"shape":[64,3,3,3]}',
    )).toBe(true);
    expect(text.includes(" ")).toBe(false);
  });

  it("aligns every payload offset and omits trailing padding", () => {
    const headerLen = Number(blob.readBigUInt64LE(8));
    const manifest: Array<{ offset: number; byte_length: number }> =
      JSON.parse(blob.toString("utf-8", 16, 16 + headerLen));
    for (const entry of manifest) {
      expect(entry.offset % ALIGN).toBe(0);
    }
    const last = manifest[manifest.length - 1];
    expect(blob.length).toBe(
      align(16 + headerLen) + last.offset + last.byte_length,
    );
  });

  it("round-trips tensor values", () => {
    const source = makeCanonicalFixture(7);
    const headerLen = Number(blob.readBigUInt64LE(8));
    const manifest: Array<{
      name: string; offset: number; byte_length: number;
    }> = JSON.parse(blob.toString("utf-8", 16, 16 + headerLen));
    const payloadStart = align(16 + headerLen);
    const byName = new Map(manifest.map((e) => [e.name, e]));

    for (const [layer] of CONV_PLAN) {
      const entry = byName.get(`${layer}.kernel`)!;
      const want = source.get(layer)!.kernel.data;
      expect(entry.byte_length).toBe(want.byteLength);
      const got = new Float32Array(
        blob.buffer.slice(
          blob.byteOffset + payloadStart + entry.offset,
          blob.byteOffset + payloadStart + entry.offset + entry.byte_length,
        ),
      );
      expect(got).toEqual(want);
    }
  });

  it("is byte-for-byte deterministic", () => {
    const again = writeVggw(fixtureTensors());
    expect(again.equals(blob)).toBe(true);
  });

  it("rejects an incomplete layer set", () => {
    const tensors = fixtureTensors();
    tensors.delete("conv3_2");
    expect(() => writeVggw(tensors)).toThrow(/missing layer: conv3_2/);
  });
});
