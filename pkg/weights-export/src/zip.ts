/**
 * Minimal zip reader: enough to open .npz archives (stored or deflated
 * members, no zip64, no encryption).
 *
 * Walks the central directory found via the end-of-central-directory
 * record; member data offsets are taken from each local header because
 * local and central extra fields may differ in length.
 */

import * as zlib from "node:zlib";

const EOCD_SIG = 0x06054b50;
const CENTRAL_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

export function readZipEntries(buf: Buffer, name: string): Map<string, Buffer> {
  let eocd = -1;
  const scanFloor = Math.max(0, buf.length - 22 - 65535);
  for (let pos = buf.length - 22; pos >= scanFloor; pos -= 1) {
    if (buf.readUInt32LE(pos) === EOCD_SIG) {
      eocd = pos;
      break;
    }
  }
  if (eocd < 0) {
    throw new Error(`${name}: not a zip archive`);
  }
  const entryCount = buf.readUInt16LE(eocd + 10);
  let pos = buf.readUInt32LE(eocd + 16);

  const entries = new Map<string, Buffer>();
  for (let i = 0; i < entryCount; i += 1) {
    if (buf.readUInt32LE(pos) !== CENTRAL_SIG) {
      throw new Error(`${name}: corrupt zip central directory`);
    }
    const method = buf.readUInt16LE(pos + 10);
    const compressedSize = buf.readUInt32LE(pos + 20);
    const nameLen = buf.readUInt16LE(pos + 28);
    const extraLen = buf.readUInt16LE(pos + 30);
    const commentLen = buf.readUInt16LE(pos + 32);
    const localOffset = buf.readUInt32LE(pos + 42);
    const memberName = buf.toString("utf-8", pos + 46, pos + 46 + nameLen);
    pos += 46 + nameLen + extraLen + commentLen;

    if (buf.readUInt32LE(localOffset) !== LOCAL_SIG) {
      throw new Error(`${name}: corrupt zip local header for ${memberName}`);
    }
    const localNameLen = buf.readUInt16LE(localOffset + 26);
    const localExtraLen = buf.readUInt16LE(localOffset + 28);
    const dataStart = localOffset + 30 + localNameLen + localExtraLen;
    const raw = buf.subarray(dataStart, dataStart + compressedSize);

    let data: Buffer;
    if (method === 0) {
      data = Buffer.from(raw);
    } else if (method === 8) {
      data = zlib.inflateRawSync(raw);
    } else {
      throw new Error(
        `${name}: unsupported zip compression method ${method} ` +
        `for ${memberName}`,
      );
    }
    entries.set(memberName, data);
  }
  return entries;
}
