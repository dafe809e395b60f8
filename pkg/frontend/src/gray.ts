// Client-side grayscale conversion, same BT.601 weights and rounding as the
// engine so both ends of the wire agree on pixel values.

export const FRAME_WIDTH = 320;
export const FRAME_HEIGHT = 240;

export function rgbaToGray(rgba: Uint8ClampedArray, width: number, height: number): Uint8Array {
  if (rgba.length !== width * height * 4) {
    throw new Error(`rgba buffer is ${rgba.length} bytes, expected ${width * height * 4}`);
  }
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) {
    const o = i * 4;
    const lum = 0.299 * rgba[o] + 0.587 * rgba[o + 1] + 0.114 * rgba[o + 2];
    out[i] = Math.min(255, Math.max(0, Math.round(lum)));
  }
  return out;
}
