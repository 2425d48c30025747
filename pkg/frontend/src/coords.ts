/** Canvas <-> panel-pixel coordinate mapping under zoom and pan.
 *
 * Dots are stored in integer panel pixels; the canvas draws each panel pixel
 * as a zoom x zoom square. canvasToPanel snaps a click to the pixel under
 * it, panelToCanvas returns that pixel's center, and the round trip is
 * stable: mapping a pixel's center back always yields the same pixel.
 */

export interface View {
  zoom: number; // canvas pixels per panel pixel, > 0
  offsetX: number; // canvas position of panel pixel (0,0)'s left edge
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

export function canvasToPanel(c: Point, view: View, panelW: number, panelH: number): Point {
  const x = Math.floor((c.x - view.offsetX) / view.zoom);
  const y = Math.floor((c.y - view.offsetY) / view.zoom);
  return {
    x: Math.min(Math.max(x, 0), panelW - 1),
    y: Math.min(Math.max(y, 0), panelH - 1),
  };
}

export function panelToCanvas(p: Point, view: View): Point {
  return {
    x: (p.x + 0.5) * view.zoom + view.offsetX,
    y: (p.y + 0.5) * view.zoom + view.offsetY,
  };
}
