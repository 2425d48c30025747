import { ApiClient } from "./api.js";
import { labToDisplayRgb, rgbToChroma, wheelToChroma, Chroma } from "./color.js";
import { panelToCanvas, View } from "./coords.js";
import { RevisionController } from "./controller.js";

const api = new ApiClient("");
const controller = new RevisionController(api);

const els = {
  file: document.getElementById("page-file") as HTMLInputElement,
  panels: document.getElementById("panel-list") as HTMLDivElement,
  canvas: document.getElementById("panel-canvas") as HTMLCanvasElement,
  zoom: document.getElementById("zoom") as HTMLInputElement,
  wheel: document.getElementById("chroma-wheel") as HTMLCanvasElement,
  swatch: document.getElementById("swatch") as HTMLDivElement,
  rgbFallback: document.getElementById("rgb-fallback") as HTMLInputElement,
  dominant: document.getElementById("dominant-scale") as HTMLInputElement,
  dominantValue: document.getElementById("dominant-value") as HTMLSpanElement,
  colorize: document.getElementById("colorize") as HTMLButtonElement,
  undo: document.getElementById("undo-dot") as HTMLButtonElement,
  previous: document.getElementById("previous-result") as HTMLImageElement,
  toast: document.getElementById("toast") as HTMLDivElement,
};

let activePanel = 0;
let pickedChroma: Chroma | null = null;
let currentBitmap: ImageBitmap | null = null;

function toast(message: string) {
  els.toast.textContent = message;
  els.toast.classList.add("visible");
  setTimeout(() => els.toast.classList.remove("visible"), 4000);
}

controller.onError = toast;

function view(): View {
  return { zoom: Number(els.zoom.value), offsetX: 0, offsetY: 0 };
}

function drawWheel() {
  const ctx = els.wheel.getContext("2d")!;
  const size = els.wheel.width;
  const radius = size / 2;
  const image = ctx.createImageData(size, size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const dx = (x - radius) / radius;
      const dy = (y - radius) / radius;
      const r = Math.hypot(dx, dy);
      const offset = (y * size + x) * 4;
      if (r > 1) continue;
      const chroma = wheelToChroma(Math.atan2(dy, dx), r);
      const [cr, cg, cb] = labToDisplayRgb(60, chroma.a, chroma.b);
      image.data[offset] = cr;
      image.data[offset + 1] = cg;
      image.data[offset + 2] = cb;
      image.data[offset + 3] = 255;
    }
  }
  ctx.putImageData(image, 0, 0);
}

function updateSwatch() {
  if (!pickedChroma) return;
  const [r, g, b] = labToDisplayRgb(60, pickedChroma.a, pickedChroma.b);
  els.swatch.style.background = `rgb(${r},${g},${b})`;
  els.swatch.title = `a=${pickedChroma.a.toFixed(1)} b=${pickedChroma.b.toFixed(1)}`;
}

async function redrawPanel() {
  const session = controller.session;
  if (!session) return;
  const state = session.panels[activePanel];
  const ctx = els.canvas.getContext("2d")!;
  const v = view();
  const rect = session.layout.panels[activePanel];
  els.canvas.width = Math.ceil(rect.w * v.zoom);
  els.canvas.height = Math.ceil(rect.h * v.zoom);
  ctx.imageSmoothingEnabled = v.zoom < 1;
  if (!state.current) {
    state.current = await api.panelImage(session.id, activePanel);
  }
  currentBitmap = await createImageBitmap(state.current);
  ctx.drawImage(currentBitmap, 0, 0, els.canvas.width, els.canvas.height);
  for (const dot of state.dots) {
    const c = panelToCanvas({ x: dot.x, y: dot.y }, v);
    const [r, g, b] = labToDisplayRgb(60, dot.a, dot.b);
    ctx.beginPath();
    ctx.arc(c.x, c.y, Math.max(3, v.zoom / 2), 0, 2 * Math.PI);
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fill();
    ctx.strokeStyle = "#222";
    ctx.stroke();
  }
  if (state.previous) {
    els.previous.src = URL.createObjectURL(state.previous);
  }
}

function renderPanelList() {
  const session = controller.session;
  if (!session) return;
  els.panels.textContent = "";
  session.layout.panels.forEach((rect, i) => {
    const button = document.createElement("button");
    button.textContent = `panel ${i} (${rect.w}×${rect.h})`;
    button.className = i === activePanel ? "active" : "";
    button.addEventListener("click", () => {
      activePanel = i;
      renderPanelList();
      void redrawPanel();
    });
    button.addEventListener("dragover", (e) => e.preventDefault());
    button.addEventListener("drop", async (e) => {
      e.preventDefault();
      const file = e.dataTransfer?.files[0];
      if (!file) return;
      try {
        await controller.dropReference(i, file);
        toast(`reference ${file.name} set on panel ${i}`);
      } catch (err) {
        toast(String(err));
      }
    });
    els.panels.appendChild(button);
  });
}

els.file.addEventListener("change", async () => {
  const file = els.file.files?.[0];
  if (!file) return;
  try {
    await controller.uploadPage(file);
    activePanel = 0;
    renderPanelList();
    await redrawPanel();
  } catch (err) {
    toast(String(err));
  }
});

els.wheel.addEventListener("click", (e) => {
  const bounds = els.wheel.getBoundingClientRect();
  const radius = els.wheel.width / 2;
  const dx = (e.clientX - bounds.left - radius) / radius;
  const dy = (e.clientY - bounds.top - radius) / radius;
  if (Math.hypot(dx, dy) > 1) return;
  pickedChroma = wheelToChroma(Math.atan2(dy, dx), Math.hypot(dx, dy));
  updateSwatch();
});

els.rgbFallback.addEventListener("change", () => {
  const hex = els.rgbFallback.value;
  const r = parseInt(hex.slice(1, 3), 16);
  const g = parseInt(hex.slice(3, 5), 16);
  const b = parseInt(hex.slice(5, 7), 16);
  pickedChroma = rgbToChroma(r, g, b);
  updateSwatch();
});

els.canvas.addEventListener("click", async (e) => {
  if (!pickedChroma) {
    toast("pick a chroma first");
    return;
  }
  const bounds = els.canvas.getBoundingClientRect();
  const point = { x: e.clientX - bounds.left, y: e.clientY - bounds.top };
  try {
    await controller.placeDot(activePanel, point, view(), pickedChroma);
    await redrawPanel();
  } catch (err) {
    toast(String(err));
  }
});

els.undo.addEventListener("click", async () => {
  await controller.undoDot(activePanel);
  await redrawPanel();
});

els.dominant.addEventListener("input", () => {
  els.dominantValue.textContent = Number(els.dominant.value).toFixed(2);
});

els.dominant.addEventListener("change", async () => {
  try {
    await controller.releaseDominantScale(activePanel, Number(els.dominant.value));
  } catch (err) {
    toast(String(err));
  }
});

els.colorize.addEventListener("click", async () => {
  els.colorize.disabled = true;
  try {
    const ran = await controller.colorize(activePanel);
    if (ran) await redrawPanel();
  } finally {
    els.colorize.disabled = false;
  }
});

els.zoom.addEventListener("change", () => void redrawPanel());

drawWheel();
