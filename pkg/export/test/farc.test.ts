import { describe, expect, it } from 'vitest';

import { FarcFormatError, FarcRecord, decodeFarc, encodeFarc, summarize } from '../src/farc';

function sampleRecords(n = 4): FarcRecord[] {
  const records: FarcRecord[] = [];
  for (let i = 0; i < n; i++) {
    const features = new Float32Array(2 * 2 * 3);
    for (let j = 0; j < features.length; j++) {
      features[j] = Math.fround(Math.sin(i * 31 + j));
    }
    records.push({
      label: i % 2,
      logits: new Float32Array([Math.fround(0.1 * i), Math.fround(1 - 0.1 * i)]),
      features,
      height: 2,
      width: 2,
      depth: 3,
    });
  }
  return records;
}

describe('farc round trip', () => {
  it('preserves f32 bits exactly', () => {
    const records = sampleRecords();
    const decoded = decodeFarc(encodeFarc(records));
    expect(decoded.length).toBe(records.length);
    decoded.forEach((rec, i) => {
      expect(rec.label).toBe(records[i].label);
      expect(new Uint32Array(rec.logits.buffer)).toEqual(
        new Uint32Array(records[i].logits.buffer));
      expect(new Uint32Array(rec.features.buffer)).toEqual(
        new Uint32Array(records[i].features.buffer));
    });
  });

  it('re-encoding is byte identical', () => {
    const buf = encodeFarc(sampleRecords());
    const again = encodeFarc(decodeFarc(buf));
    expect(again.equals(buf)).toBe(true);
  });

  it('summarizes records', () => {
    const summary = summarize(sampleRecords(6));
    expect(summary.records).toBe(6);
    expect(summary.nLogits).toBe(2);
    expect(summary.featureDims).toEqual([[2, 2, 3]]);
    expect(summary.perClass).toEqual({ '0': 3, '1': 3 });
  });
});

describe('farc validation offsets', () => {
  it('rejects a bad magic at offset 0', () => {
    const bad = Buffer.from('NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00', 'ascii');
    expect(() => decodeFarc(bad)).toThrowError(FarcFormatError);
    try {
      decodeFarc(bad);
    } catch (err) {
      expect((err as FarcFormatError).offset).toBe(0);
    }
  });

  it('rejects an unsupported version at offset 4', () => {
    const buf = encodeFarc(sampleRecords(1));
    buf.writeUInt8(9, 4);
    try {
      decodeFarc(buf);
      throw new Error('unreachable');
    } catch (err) {
      expect((err as FarcFormatError).offset).toBe(4);
    }
  });

  it('reports the field start offset of a truncated record', () => {
    const buf = encodeFarc(sampleRecords(1));
    // Record at 13: label(4) + logits(8) + dims(12) => features at 37.
    const cut = buf.subarray(0, 13 + 4 + 8 + 12 + 5);
    try {
      decodeFarc(cut);
      throw new Error('unreachable');
    } catch (err) {
      expect((err as FarcFormatError).message).toContain('features in record 0');
      expect((err as FarcFormatError).offset).toBe(13 + 4 + 8 + 12);
    }
  });

  it('reports the offset of a NaN feature and names the record', () => {
    const records = sampleRecords(2);
    records[1].features[5] = NaN;
    const buf = encodeFarc(records);
    try {
      decodeFarc(buf);
      throw new Error('unreachable');
    } catch (err) {
      const recSize = 4 + 8 + 12 + 4 * 12;
      expect((err as FarcFormatError).message).toContain('record 1');
      expect((err as FarcFormatError).offset).toBe(13 + recSize + 4 + 8 + 12 + 4 * 5);
    }
  });

  it('rejects trailing bytes', () => {
    const buf = Buffer.concat([encodeFarc(sampleRecords(1)), Buffer.from([0])]);
    try {
      decodeFarc(buf);
      throw new Error('unreachable');
    } catch (err) {
      expect((err as FarcFormatError).offset).toBe(buf.length - 1);
    }
  });
});
