/** Display-only color math for the chroma picker.
 *
 * The picker works in (a, b) chrominance at a fixed mid lightness; these
 * conversions render swatches client-side. The authoritative Lab math stays
 * on the server, so small deviations here never leak into results.
 */

export interface Chroma {
  a: number;
  b: number;
}

const WHITE = { x: 0.95047, y: 1.0, z: 1.08883 };

function finv(t: number): number {
  const d = 6 / 29;
  return t > d ? t * t * t : 3 * d * d * (t - 4 / 29);
}

function compand(c: number): number {
  const v = c <= 0.0031308 ? 12.92 * c : 1.055 * Math.pow(c, 1 / 2.4) - 0.055;
  return Math.min(255, Math.max(0, Math.round(v * 255)));
}

export function labToDisplayRgb(l: number, a: number, b: number): [number, number, number] {
  const fy = (l + 16) / 116;
  const fx = fy + a / 500;
  const fz = fy - b / 200;
  const x = WHITE.x * finv(fx);
  const y = WHITE.y * finv(fy);
  const z = WHITE.z * finv(fz);
  const r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const g = -0.969266 * x + 1.8760108 * y + 0.041556 * z;
  const bb = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  return [compand(r), compand(g), compand(bb)];
}

/** RGB fallback for users picking colors with a native color input. */
export function rgbToChroma(r: number, g: number, b: number): Chroma {
  const lin = (c: number) => {
    const v = c / 255;
    return v <= 0.04045 ? v / 12.92 : Math.pow((v + 0.055) / 1.055, 2.4);
  };
  const rl = lin(r);
  const gl = lin(g);
  const bl = lin(b);
  const x = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / WHITE.x;
  const y = 0.2126729 * rl + 0.7151522 * gl + 0.072175 * bl;
  const z = (0.0193339 * rl + 0.119192 * gl + 0.9503041 * bl) / WHITE.z;
  const f = (t: number) => {
    const d = 6 / 29;
    return t > d * d * d ? Math.cbrt(t) : t / (3 * d * d) + 4 / 29;
  };
  return { a: 500 * (f(x) - f(y)), b: 200 * (f(y) - f(z)) };
}

/** Positions on the chroma wheel: angle selects hue in the (a,b) plane,
 * radius selects saturation up to the Lab chroma the picker exposes. */
export function wheelToChroma(angle: number, radius: number, maxChroma = 100): Chroma {
  const c = Math.min(Math.max(radius, 0), 1) * maxChroma;
  return { a: c * Math.cos(angle), b: c * Math.sin(angle) };
}
