import { ApiClient, Dot } from "./api.js";
import { canvasToPanel, Point, View } from "./coords.js";
import { Chroma } from "./color.js";
import { newSession, UiPanelState, UiSession } from "./state.js";

/** Drives the revision workflow: every user gesture becomes exactly one
 * service call, and local state is updated from the response. One
 * recolorization may be in flight per panel; further requests are refused
 * until the response lands (mirrors the server's 409 contract). */
export class RevisionController {
  session: UiSession | null = null;
  onError: (message: string) => void = () => {};

  constructor(private api: ApiClient) {}

  private require(): UiSession {
    if (!this.session) throw new Error("no session; upload a page first");
    return this.session;
  }

  panel(index: number): UiPanelState {
    const session = this.require();
    const state = session.panels[index];
    if (!state) throw new Error(`panel ${index} out of range`);
    return state;
  }

  async uploadPage(page: Blob): Promise<UiSession> {
    const info = await this.api.createSession(page);
    this.session = newSession(info.id, info.revision, info.layout);
    return this.session;
  }

  /** Reference image dropped onto a panel. */
  async dropReference(index: number, file: File, mode: "palette" | "histogram" = "palette"): Promise<void> {
    const session = this.require();
    session.revision = await this.api.setReference(session.id, index, file, mode);
    this.panel(index).referenceNames.push(file.name);
  }

  /** Canvas click with an active color picker places a one-pixel dot. */
  async placeDot(index: number, canvasPoint: Point, view: View, chroma: Chroma): Promise<Dot> {
    const session = this.require();
    const rect = session.layout.panels[index];
    const p = canvasToPanel(canvasPoint, view, rect.w, rect.h);
    const dot: Dot = { x: p.x, y: p.y, a: chroma.a, b: chroma.b };
    const result = await this.api.addDot(session.id, index, dot);
    session.revision = result.revision;
    this.panel(index).dots.push(dot);
    return dot;
  }

  /** Undo removes the most recent dot. */
  async undoDot(index: number): Promise<void> {
    const session = this.require();
    const state = this.panel(index);
    if (state.dots.length === 0) return;
    session.revision = await this.api.deleteDot(session.id, index, state.dots.length - 1);
    state.dots.pop();
  }

  /** Slider release commits the dominant-bin scale. */
  async releaseDominantScale(index: number, scale: number): Promise<void> {
    const session = this.require();
    session.revision = await this.api.setDominantScale(session.id, index, scale);
    this.panel(index).dominantScale = scale;
  }

  /** Blend-ratio slider release commits a second reference blend. */
  async releaseBlend(index: number, feature: unknown, ratio: number): Promise<void> {
    const session = this.require();
    session.revision = await this.api.setBlend(session.id, index, feature, ratio);
    this.panel(index).blendRatio = ratio;
  }

  /** The Colorize button: request a recolorization, then refresh the bitmap.
   * Returns false when a run is already in flight for this panel. */
  async colorize(index: number): Promise<boolean> {
    const session = this.require();
    const state = this.panel(index);
    if (state.busy) return false;
    state.busy = true;
    try {
      session.revision = await this.api.recolorize(session.id, index);
      const image = await this.api.panelImage(session.id, index);
      state.previous = state.current;
      state.current = image;
      return true;
    } catch (err) {
      this.onError(err instanceof Error ? err.message : String(err));
      return false;
    } finally {
      state.busy = false;
    }
  }
}
