/** Typed client for the revision service. All mutations return the new
 * session revision; images always come back as blobs so the UI never
 * manufactures pixels locally. */

export interface PanelRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Layout {
  page_w: number;
  page_h: number;
  panels: PanelRect[];
}

export interface SessionInfo {
  id: string;
  revision: number;
  layout: Layout;
}

export interface Dot {
  x: number;
  y: number;
  a: number;
  b: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(method: string, path: string, init: RequestInit = {}): Promise<Response> {
    const response = await this.fetchImpl(this.baseUrl + path, { ...init, method });
    if (!response.ok) {
      let code = "error";
      let message = `${method} ${path} failed with ${response.status}`;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(code, message, response.status);
    }
    return response;
  }

  async createSession(page: Blob): Promise<SessionInfo> {
    const form = new FormData();
    form.append("page", page, "page.png");
    const response = await this.request("POST", "/sessions", { body: form });
    return response.json();
  }

  async setReference(
    sessionId: string,
    panel: number,
    reference: Blob,
    mode: "palette" | "histogram" = "palette",
  ): Promise<number> {
    const form = new FormData();
    form.append("reference", reference, "reference.png");
    const response = await this.request(
      "PUT",
      `/sessions/${sessionId}/panels/${panel}/feature?mode=${mode}`,
      { body: form },
    );
    return (await response.json()).revision;
  }

  async setFeatureJson(sessionId: string, panel: number, feature: unknown): Promise<number> {
    const response = await this.request("PUT", `/sessions/${sessionId}/panels/${panel}/feature`, {
      body: JSON.stringify(feature),
      headers: { "content-type": "application/json" },
    });
    return (await response.json()).revision;
  }

  async addDot(sessionId: string, panel: number, dot: Dot): Promise<{ revision: number; index: number }> {
    const response = await this.request("POST", `/sessions/${sessionId}/panels/${panel}/dots`, {
      body: JSON.stringify(dot),
      headers: { "content-type": "application/json" },
    });
    return response.json();
  }

  async deleteDot(sessionId: string, panel: number, index: number): Promise<number> {
    const response = await this.request("DELETE", `/sessions/${sessionId}/panels/${panel}/dots/${index}`);
    return (await response.json()).revision;
  }

  async setDominantScale(sessionId: string, panel: number, scale: number): Promise<number> {
    const response = await this.request("PUT", `/sessions/${sessionId}/panels/${panel}/dominant_scale`, {
      body: JSON.stringify({ scale }),
      headers: { "content-type": "application/json" },
    });
    return (await response.json()).revision;
  }

  async setBlend(sessionId: string, panel: number, feature: unknown, ratio: number): Promise<number> {
    const response = await this.request("PUT", `/sessions/${sessionId}/panels/${panel}/blend`, {
      body: JSON.stringify({ feature, ratio }),
      headers: { "content-type": "application/json" },
    });
    return (await response.json()).revision;
  }

  async recolorize(sessionId: string, panel: number): Promise<number> {
    const response = await this.request("POST", `/sessions/${sessionId}/recolorize?panel=${panel}`);
    return (await response.json()).revision;
  }

  async panelImage(sessionId: string, panel: number): Promise<Blob> {
    const response = await this.request("GET", `/sessions/${sessionId}/panels/${panel}`);
    return response.blob();
  }

  async pageImage(sessionId: string): Promise<Blob> {
    const response = await this.request("GET", `/sessions/${sessionId}/page`);
    return response.blob();
  }
}
