/**
 * Run-length mask codec, matching the server's format exactly: a row-major
 * scan encoded as alternating background/foreground run counts, always
 * starting with background (the first count is 0 when pixel (0,0) is set).
 *
 * The frozen vectors in ../../tests/data/rle_vectors.json are shared with
 * the server's test suite; both codecs are tested against the same file.
 */

import type { Rle } from './types.js';

export type RleErrorCode = 'MALFORMED_RLE' | 'DIMENSION_MISMATCH';

export class RleError extends Error {
  readonly code: RleErrorCode;

  constructor(code: RleErrorCode, message: string) {
    super(message);
    this.name = 'RleError';
    this.code = code;
  }
}

/** Decode to a flat Uint8Array of 0/1 pixels, length height*width. */
export function decodeRle(rle: Rle): Uint8Array {
  if (typeof rle !== 'object' || rle === null || !('size' in rle) || !('counts' in rle)) {
    throw new RleError('MALFORMED_RLE', "rle must be an object with 'size' and 'counts'");
  }
  const { size, counts } = rle;
  if (!Array.isArray(size) || size.length !== 2 || !size.every(Number.isInteger)) {
    throw new RleError('MALFORMED_RLE', `size must be [H, W] integers, got ${JSON.stringify(size)}`);
  }
  const [h, w] = size;
  if (h < 1 || w < 1) {
    throw new RleError('MALFORMED_RLE', `size entries must be >= 1, got [${h}, ${w}]`);
  }
  if (!Array.isArray(counts)) {
    throw new RleError('MALFORMED_RLE', 'counts must be an array');
  }
  let total = 0;
  for (let i = 0; i < counts.length; i++) {
    const c = counts[i];
    if (!Number.isInteger(c) || (c as number) < 0) {
      throw new RleError('MALFORMED_RLE', `counts[${i}] must be a non-negative integer, got ${c}`);
    }
    if (c === 0 && i > 0) {
      throw new RleError('MALFORMED_RLE', `interior zero run at counts[${i}]`);
    }
    total += c as number;
  }
  if (total !== h * w) {
    throw new RleError(
      'DIMENSION_MISMATCH',
      `counts sum to ${total}, expected ${h * w} for size [${h}, ${w}]`,
    );
  }
  const out = new Uint8Array(h * w);
  let pos = 0;
  for (let i = 0; i < counts.length; i++) {
    const run = counts[i] as number;
    // even runs are background, odd runs foreground
    if (i % 2 === 1) out.fill(1, pos, pos + run);
    pos += run;
  }
  return out;
}

/** Encode a flat 0/1 pixel array (row-major, length height*width). */
export function encodeRle(pixels: ArrayLike<number>, height: number, width: number): Rle {
  if (pixels.length !== height * width) {
    throw new RleError(
      'DIMENSION_MISMATCH',
      `expected ${height * width} pixels for [${height}, ${width}], got ${pixels.length}`,
    );
  }
  const counts: number[] = [];
  if (pixels.length > 0 && pixels[0]) counts.push(0);
  let run = 1;
  for (let i = 1; i < pixels.length; i++) {
    if (Boolean(pixels[i]) === Boolean(pixels[i - 1])) {
      run += 1;
    } else {
      counts.push(run);
      run = 1;
    }
  }
  if (pixels.length > 0) counts.push(run);
  return { size: [height, width], counts };
}

export function maskArea(pixels: ArrayLike<number>): number {
  let area = 0;
  for (let i = 0; i < pixels.length; i++) {
    if (pixels[i]) area += 1;
  }
  return area;
}
