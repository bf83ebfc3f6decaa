/** Binary P6 pixmap reading/writing; the dataset interchange format. */

export interface PpmImage {
  width: number;
  height: number;
  /** RGB float values in [0, 1], row-major (h, w, c). */
  data: Float32Array;
}

export function decodePpm(buf: Buffer): PpmImage {
  if (buf.length < 2 || buf.toString('ascii', 0, 2) !== 'P6') {
    throw new Error('not a P6 pixmap');
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) { // comment
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    const start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (start === pos) throw new Error('truncated PPM header');
    fields.push(parseInt(buf.toString('ascii', start, pos), 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const need = width * height * 3;
  if (buf.length - pos < need) throw new Error('truncated PPM pixel data');
  const data = new Float32Array(need);
  for (let i = 0; i < need; i++) {
    data[i] = buf[pos + i] / 255;
  }
  return { width, height, data };
}

export function encodePpm(img: PpmImage): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, 'ascii');
  const pixels = Buffer.alloc(img.width * img.height * 3);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = Math.round(Math.min(Math.max(img.data[i], 0), 1) * 255);
  }
  return Buffer.concat([header, pixels]);
}
