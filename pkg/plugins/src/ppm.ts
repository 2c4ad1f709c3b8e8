/**
 * Binary PPM (P6) / PGM (P5) decoding. The pipeline spools frames to disk
 * in this format for every plugin request.
 */

import { readFileSync } from "node:fs";

export interface Image {
  width: number;
  height: number;
  channels: 1 | 3;
  /** row-major, interleaved channels */
  data: Uint8Array;
}

export function decodePpm(bytes: Uint8Array): Image {
  const magic = String.fromCharCode(bytes[0], bytes[1]);
  let channels: 1 | 3;
  if (magic === "P6") channels = 3;
  else if (magic === "P5") channels = 1;
  else throw new Error(`unsupported magic ${magic}`);

  // header: three whitespace-separated ints, # comments allowed
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    if (start === pos) throw new Error("truncated header");
    fields.push(parseInt(Buffer.from(bytes.subarray(start, pos)).toString("ascii"), 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const need = width * height * channels;
  const data = bytes.subarray(pos, pos + need);
  if (data.length < need) throw new Error("truncated payload");
  return { width, height, channels, data: new Uint8Array(data) };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

export function loadImage(path: string): Image {
  return decodePpm(readFileSync(path));
}

/** BT.601 luma as float64 values in [0, 255]. */
export function luma(image: Image): Float64Array {
  const n = image.width * image.height;
  const out = new Float64Array(n);
  if (image.channels === 1) {
    for (let i = 0; i < n; i++) out[i] = image.data[i];
    return out;
  }
  for (let i = 0; i < n; i++) {
    out[i] =
      0.299 * image.data[3 * i] +
      0.587 * image.data[3 * i + 1] +
      0.114 * image.data[3 * i + 2];
  }
  return out;
}
