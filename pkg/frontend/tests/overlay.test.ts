import { describe, expect, it } from 'vitest';

import { buildOverlayImage, hashId, hslToRgb, promptMarkers, trackColor } from '../src/overlay.js';

describe('track colors', () => {
  it('are deterministic per id', () => {
    expect(trackColor('t000')).toEqual(trackColor('t000'));
    expect(hashId('shape0.left')).toBe(hashId('shape0.left'));
  });

  it('differ across nearby ids', () => {
    const ids = ['t000', 't001', 't002', 'shape0', 'shape0.left', 'background'];
    const colors = new Set(ids.map((id) => trackColor(id).join(',')));
    expect(colors.size).toBe(ids.length);
  });

  it('stay inside RGB range', () => {
    for (const hue of [0, 59.9, 60, 120, 180, 240, 300, 359]) {
      for (const channel of hslToRgb(hue, 0.72, 0.55)) {
        expect(channel).toBeGreaterThanOrEqual(0);
        expect(channel).toBeLessThanOrEqual(255);
      }
    }
  });

  it('maps primary hues to the expected channels', () => {
    expect(hslToRgb(0, 1, 0.5)).toEqual([255, 0, 0]);
    expect(hslToRgb(120, 1, 0.5)).toEqual([0, 255, 0]);
    expect(hslToRgb(240, 1, 0.5)).toEqual([0, 0, 255]);
  });
});

describe('overlay buffer', () => {
  it('colors exactly the mask pixels', () => {
    const mask = new Uint8Array([1, 0, 0, 1]);
    const buffer = buildOverlayImage(mask, 2, 2, [10, 20, 30], 99);
    expect([...buffer.slice(0, 4)]).toEqual([10, 20, 30, 99]);
    expect([...buffer.slice(4, 8)]).toEqual([0, 0, 0, 0]);
    expect([...buffer.slice(8, 12)]).toEqual([0, 0, 0, 0]);
    expect([...buffer.slice(12, 16)]).toEqual([10, 20, 30, 99]);
  });

  it('rejects size mismatches', () => {
    expect(() => buildOverlayImage(new Uint8Array(3), 2, 2, [0, 0, 0])).toThrow(/expected 4/);
  });
});

describe('prompt markers', () => {
  it('centers markers on scaled pixel centers', () => {
    const markers = promptMarkers([{ x: 2, y: 1, label: 'pos' }], 8, 8);
    expect(markers).toEqual([{ cx: 20, cy: 12, positive: true }]);
  });

  it('keeps the positive/negative distinction', () => {
    const markers = promptMarkers(
      [
        { x: 0, y: 0, label: 'pos' },
        { x: 1, y: 0, label: 'neg' },
      ],
      1,
      1,
    );
    expect(markers.map((m) => m.positive)).toEqual([true, false]);
  });
});
