/** Mask overlay rendering: deterministic per-track colors and RGBA buffers. */

export type Rgb = [number, number, number];

/** FNV-1a 32-bit hash; stable across sessions so colors never reshuffle. */
export function hashId(id: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < id.length; i++) {
    h ^= id.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

export function hslToRgb(hue: number, sat: number, light: number): Rgb {
  const c = (1 - Math.abs(2 * light - 1)) * sat;
  const hp = (((hue % 360) + 360) % 360) / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  let rgb: Rgb;
  if (hp < 1) rgb = [c, x, 0];
  else if (hp < 2) rgb = [x, c, 0];
  else if (hp < 3) rgb = [0, c, x];
  else if (hp < 4) rgb = [0, x, c];
  else if (hp < 5) rgb = [x, 0, c];
  else rgb = [c, 0, x];
  const m = light - c / 2;
  return [
    Math.round((rgb[0] + m) * 255),
    Math.round((rgb[1] + m) * 255),
    Math.round((rgb[2] + m) * 255),
  ];
}

/** Color for a track id: hue from the id hash, fixed saturation/lightness. */
export function trackColor(trackId: string): Rgb {
  return hslToRgb(hashId(trackId) % 360, 0.72, 0.55);
}

/**
 * Paint a mask into an RGBA buffer sized height*width*4. Pixels outside the
 * mask stay fully transparent, so the buffer can sit over the frame image.
 */
export function buildOverlayImage(
  pixels: ArrayLike<number>,
  height: number,
  width: number,
  color: Rgb,
  alpha = 150,
): Uint8ClampedArray<ArrayBuffer> {
  if (pixels.length !== height * width) {
    throw new Error(`mask has ${pixels.length} pixels, expected ${height * width}`);
  }
  const out = new Uint8ClampedArray(height * width * 4);
  for (let i = 0; i < pixels.length; i++) {
    if (pixels[i]) {
      const o = i * 4;
      out[o] = color[0];
      out[o + 1] = color[1];
      out[o + 2] = color[2];
      out[o + 3] = alpha;
    }
  }
  return out;
}

/** Marker positions for click prompts, scaled to canvas coordinates. */
export interface PromptMarker {
  cx: number;
  cy: number;
  positive: boolean;
}

export function promptMarkers(
  prompts: { x: number; y: number; label: 'pos' | 'neg' }[],
  scaleX: number,
  scaleY: number,
): PromptMarker[] {
  return prompts.map((p) => ({
    cx: (p.x + 0.5) * scaleX,
    cy: (p.y + 0.5) * scaleY,
    positive: p.label === 'pos',
  }));
}
