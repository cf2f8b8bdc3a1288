/**
 * Test-only fixtures: a deterministic batch generator and just enough raw
 * tensor archive I/O to hand a batch to the reference pipeline and read its
 * outputs back. Dataset I/O is deliberately not part of the bindings.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

const MAGIC = 0x3154504c; // "LPT1" little-endian

/** Deterministic float32 batch in [0, 1] from a tiny 64-bit LCG. */
export function deterministicBatch(n: number, seed: bigint): Float32Array {
  const out = new Float32Array(n);
  let state = seed & 0xffffffffffffffffn;
  const a = 6364136223846793005n;
  const c = 1442695040888963407n;
  const mask = 0xffffffffffffffffn;
  for (let i = 0; i < n; i++) {
    state = (a * state + c) & mask;
    const top = Number(state >> 11n); // 53 bits
    out[i] = Math.fround(top / 2 ** 53);
  }
  return out;
}

export function writeArchiveDir(
  dir: string,
  images: { id: string; dims: number[]; data: Float32Array }[]
): void {
  mkdirSync(dir, { recursive: true });
  const records: Buffer[] = [];
  const indexLines: string[] = [];
  let offset = 0;
  for (const image of images) {
    const head = Buffer.alloc(8 + 4 * image.dims.length);
    head.writeUInt32LE(MAGIC, 0);
    head.writeUInt32LE(image.dims.length, 4);
    image.dims.forEach((dim, i) => head.writeUInt32LE(dim, 8 + 4 * i));
    const payload = Buffer.from(image.data.buffer, image.data.byteOffset, image.data.byteLength);
    const record = Buffer.concat([head, payload]);
    indexLines.push(`${image.id}\t${offset}\t${record.length}`);
    records.push(record);
    offset += record.length;
  }
  writeFileSync(join(dir, "images.lpt"), Buffer.concat(records));
  writeFileSync(join(dir, "images.idx"), indexLines.join("\n") + "\n");
}

export function readArchiveDir(dir: string): Map<string, Float32Array> {
  const blob = readFileSync(join(dir, "images.lpt"));
  const index = readFileSync(join(dir, "images.idx"), "utf8");
  const out = new Map<string, Float32Array>();
  for (const line of index.split("\n")) {
    if (!line.trim()) continue;
    const [id, offsetText] = line.split("\t");
    let pos = Number(offsetText);
    if (blob.readUInt32LE(pos) !== MAGIC) {
      throw new Error(`bad record magic at offset ${pos}`);
    }
    const rank = blob.readUInt32LE(pos + 4);
    pos += 8;
    let count = 1;
    for (let i = 0; i < rank; i++) {
      count *= blob.readUInt32LE(pos);
      pos += 4;
    }
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      data[i] = blob.readFloatLE(pos + 4 * i);
    }
    out.set(id, data);
  }
  return out;
}

/** Bitwise float32 equality via the underlying bytes. */
export function bitIdentical(a: Float32Array, b: Float32Array): boolean {
  if (a.length !== b.length) return false;
  const va = new DataView(a.buffer, a.byteOffset, a.byteLength);
  const vb = new DataView(b.buffer, b.byteOffset, b.byteLength);
  for (let i = 0; i < a.byteLength; i += 4) {
    if (va.getUint32(i, true) !== vb.getUint32(i, true)) return false;
  }
  return true;
}
