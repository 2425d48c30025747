import type { Dot, Layout } from "./api.js";

/** Client-side mirror of one panel's server state. The server is the source
 * of truth; this mirror is updated only after a mutation succeeds. The
 * previous result bitmap is kept client-side only, for revision compare. */
export interface UiPanelState {
  index: number;
  referenceNames: string[];
  dots: Dot[];
  dominantScale: number;
  blendRatio: number | null;
  current: Blob | null;
  previous: Blob | null;
  busy: boolean;
}

export interface UiSession {
  id: string;
  revision: number;
  layout: Layout;
  panels: UiPanelState[];
}

export function newSession(id: string, revision: number, layout: Layout): UiSession {
  return {
    id,
    revision,
    layout,
    panels: layout.panels.map((_, index) => ({
      index,
      referenceNames: [],
      dots: [],
      dominantScale: 1.0,
      blendRatio: null,
      current: null,
      previous: null,
      busy: false,
    })),
  };
}
