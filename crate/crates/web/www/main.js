// Build first: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { Scales, squeezed_wigner } from "./pkg/framesim_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function rows(flat, width) {
  const out = [];
  for (let i = 0; i < flat.length; i += width) out.push(Array.from(flat.slice(i, i + width)));
  return out;
}

// Line plot with a log-x axis; series is a list of {points: [[x, y]], color}.
function plot(canvas, series, { logY = false, label = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.points);
  const tx = (x) => Math.log10(x);
  const ty = (y) => (logY ? Math.log10(y) : y);
  const xs = all.map((p) => tx(p[0]));
  const ys = all.map((p) => ty(p[1]));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) * 1.05 || 1];
  const px = (x) => pad + ((tx(x) - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((ty(y) - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let d = Math.ceil(x0); d <= Math.floor(x1); d++) {
    const x = pad + ((d - x0) / (x1 - x0)) * (w - 2 * pad);
    ctx.fillText(`1e${d}`, x - 10, h - pad + 14);
  }
  ctx.fillText(label, pad, pad - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y))));
    ctx.stroke();
  }
}

function heatmap(canvas, values, n) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  const m = Math.max(...values.map(Math.abs)) || 1;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const v = values[i * n + j] / m;
      // flip rows so Im α grows upwards
      const k = 4 * ((n - 1 - i) * n + j);
      img.data[k] = v > 0 ? 255 : Math.round(255 * (1 + v));
      img.data[k + 1] = Math.round(255 * (1 - Math.abs(v)));
      img.data[k + 2] = v < 0 ? 255 : Math.round(255 * (1 - v));
      img.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  const c = canvas.getContext("2d");
  c.imageSmoothingEnabled = false;
  c.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function redraw() {
  let scales;
  try {
    scales = new Scales(num("g") * 1e6, num("delta") * 1e6);
  } catch (e) {
    $("status").textContent = String(e);
    return;
  }
  $("status").textContent = "";
  $("scales").textContent = `n_crit = ${scales.n_crit.toFixed(1)}, χ0/2π = ${(scales.chi0 / 2e3 / Math.PI).toFixed(1)} kHz`;

  const c = rows(scales.chi_j_curves(1e-2, 1e4, 300), 3);
  plot($("curves"), [
    { points: c.map((r) => [r[0], r[1]]), color: "#1f77b4" },
    { points: c.map((r) => [r[0], r[2]]), color: "#d62728" },
  ], { label: "blue χ/χ0, red J/J0" });

  const cum = rows(scales.cumulative_squeeze(num("drive") * 1e6, 1e7, 200), 2);
  plot($("cumulative"), [{ points: cum, color: "#2ca02c" }], { label: "ratio against final photon number" });

  const n = 81;
  const w = squeezed_wigner(parseInt($("fock").value), num("r"), num("phi"), 3.5, n, 40);
  heatmap($("wigner"), Array.from(w), n);
  scales.free();
}

await init();
for (const id of ["g", "delta", "drive", "fock", "r", "phi"]) $(id).addEventListener("input", redraw);
redraw();
