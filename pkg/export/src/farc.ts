/**
 * FARC feature archives, little-endian throughout:
 *   magic "FARC" | u8 version (1) | u32 record count | u32 N (logit count)
 *   per record: u32 label | N x f32 logits | u32 H | u32 W | u32 D
 *               | H*W*D x f32 features, row-major (h, w, d)
 *
 * Validation errors carry the byte offset where the violated field begins
 * (for truncation and non-finite values, the first bad byte).
 */

export const FARC_MAGIC = 'FARC';
export const FARC_VERSION = 1;

export interface FarcRecord {
  label: number;
  logits: Float32Array;
  features: Float32Array; // H*W*D values, row-major
  height: number;
  width: number;
  depth: number;
}

export class FarcFormatError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} (byte offset ${offset})`);
    this.name = 'FarcFormatError';
  }
}

export function encodeFarc(records: FarcRecord[]): Buffer {
  if (records.length === 0) {
    throw new Error('refusing to write an empty archive');
  }
  const nLogits = records[0].logits.length;
  let size = 13;
  for (const r of records) {
    if (r.logits.length !== nLogits) {
      throw new Error('inconsistent logit count across records');
    }
    if (r.features.length !== r.height * r.width * r.depth) {
      throw new Error('feature length does not match dims');
    }
    size += 4 + 4 * nLogits + 12 + 4 * r.features.length;
  }
  const buf = Buffer.alloc(size);
  buf.write(FARC_MAGIC, 0, 'ascii');
  buf.writeUInt8(FARC_VERSION, 4);
  buf.writeUInt32LE(records.length, 5);
  buf.writeUInt32LE(nLogits, 9);
  let off = 13;
  for (const r of records) {
    buf.writeUInt32LE(r.label >>> 0, off);
    off += 4;
    for (const v of r.logits) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
    buf.writeUInt32LE(r.height, off);
    buf.writeUInt32LE(r.width, off + 4);
    buf.writeUInt32LE(r.depth, off + 8);
    off += 12;
    for (const v of r.features) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
  }
  return buf;
}

function readF32Block(
  buf: Buffer, off: number, count: number, what: string, rec: number,
): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const v = buf.readFloatLE(off + 4 * i);
    if (!Number.isFinite(v)) {
      throw new FarcFormatError(`non-finite ${what} in record ${rec}`, off + 4 * i);
    }
    out[i] = v;
  }
  return out;
}

export function decodeFarc(buf: Buffer): FarcRecord[] {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== FARC_MAGIC) {
    throw new FarcFormatError('bad magic', 0);
  }
  if (buf.length < 13) {
    throw new FarcFormatError('truncated header', 4);
  }
  if (buf.readUInt8(4) !== FARC_VERSION) {
    throw new FarcFormatError(`unsupported version ${buf.readUInt8(4)}`, 4);
  }
  const count = buf.readUInt32LE(5);
  const nLogits = buf.readUInt32LE(9);
  let off = 13;
  const need = (bytes: number, what: string, rec: number) => {
    if (off + bytes > buf.length) {
      throw new FarcFormatError(`truncated ${what} in record ${rec}`, off);
    }
  };
  const records: FarcRecord[] = [];
  for (let rec = 0; rec < count; rec++) {
    need(4, 'label', rec);
    const label = buf.readUInt32LE(off);
    off += 4;
    need(4 * nLogits, 'logits', rec);
    const logits = readF32Block(buf, off, nLogits, 'logit', rec);
    off += 4 * nLogits;
    need(12, 'feature dims', rec);
    const height = buf.readUInt32LE(off);
    const width = buf.readUInt32LE(off + 4);
    const depth = buf.readUInt32LE(off + 8);
    if (height === 0 || width === 0 || depth === 0) {
      throw new FarcFormatError(`zero feature dimension in record ${rec}`, off);
    }
    off += 12;
    const n = height * width * depth;
    need(4 * n, 'features', rec);
    const features = readF32Block(buf, off, n, 'feature', rec);
    off += 4 * n;
    records.push({ label, logits, features, height, width, depth });
  }
  if (off !== buf.length) {
    throw new FarcFormatError('trailing bytes after last record', off);
  }
  return records;
}

export interface FarcSummary {
  records: number;
  nLogits: number;
  featureDims: number[][];
  perClass: Record<string, number>;
}

export function summarize(records: FarcRecord[]): FarcSummary {
  const dims = new Map<string, number[]>();
  const perClass: Record<string, number> = {};
  for (const r of records) {
    dims.set(`${r.height},${r.width},${r.depth}`, [r.height, r.width, r.depth]);
    perClass[r.label] = (perClass[r.label] ?? 0) + 1;
  }
  return {
    records: records.length,
    nLogits: records[0]?.logits.length ?? 0,
    featureDims: [...dims.values()].sort((a, b) => a[0] - b[0]),
    perClass,
  };
}
