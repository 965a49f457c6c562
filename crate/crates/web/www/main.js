import init, { caseStudy, thresholdCurve, spaceSizes } from "./pkg/junction_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// Draws line series on a canvas with linear axes.
function plot(canvas, series, xLabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y).filter(Number.isFinite);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y1 = Math.max(...ys) * 1.05 || 1;
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - (y / y1) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(xLabel, w / 2, h - 10);
  ctx.fillText(x0.toFixed(2), pad, h - pad + 14);
  ctx.fillText(x1.toFixed(2), w - pad - 20, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || COLORS[k % COLORS.length];
    ctx.setLineDash(s.dash ? [5, 4] : []);
    ctx.beginPath();
    s.x.forEach((x, i) => {
      const y = Math.min(s.y[i], y1);
      i ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, w - pad - 200, pad + 14 + 14 * k);
  });
  ctx.setLineDash([]);
}

function runSweep() {
  $("s-out").textContent = "solving...";
  // Let the message paint before the blocking call.
  setTimeout(() => {
    try {
      const r = JSON.parse(caseStudy(num("s-slots"), num("s-min"), num("s-max"), num("s-step")));
      const series = [];
      r.layouts.forEach((l, k) => {
        series.push({ x: l.mu, y: l.e_lw, label: `E[L_W] ${l.name}`, color: COLORS[k] });
        series.push({ x: l.mu, y: l.threshold, label: `threshold ${l.name}`, color: COLORS[k], dash: true });
      });
      plot($("s-plot"), series, "service rate (trains/min)");
      const lines = r.layouts.map((l, k) => {
        const b = l.b_max == null ? "infeasible" : `b_max = ${l.b_max.toFixed(2)} min`;
        const rel = r.relative[k] == null ? "" : ` (${(100 * r.relative[k]).toFixed(1)}%)`;
        return `${l.name}: ${l.states} states, ${b}${rel}`;
      });
      $("s-out").textContent = `route ${r.route}, p_pt = ${r.p_pt.toFixed(3)}\n` + lines.join("\n");
    } catch (e) {
      $("s-out").textContent = String(e);
    }
  }, 10);
}

function runThreshold() {
  try {
    const t = JSON.parse(thresholdCurve(num("t-ppt"), num("t-va"), num("t-vb"), 100));
    plot($("t-plot"), [
      { x: t.rho, y: t.threshold, label: "gamma * L*" },
      { x: t.rho, y: t.rho.map(() => t.l_star), label: "L*", dash: true },
    ], "occupancy rho");
    $("t-out").textContent = `L* = ${t.l_star.toFixed(4)}, gamma(0) = ${t.gamma[0].toFixed(3)}`;
  } catch (e) {
    $("t-out").textContent = String(e);
  }
}

function runSizes() {
  try {
    const s = JSON.parse(spaceSizes(num("z-max")));
    const rows = s.slots.map((m, i) => `${m}\t` + s.layouts.map(([, c]) => c[i]).join("\t"));
    $("z-out").textContent = "m\t" + s.layouts.map(([n]) => n).join("\t") + "\n" + rows.join("\n");
  } catch (e) {
    $("z-out").textContent = String(e);
  }
}

await init();
$("s-run").onclick = runSweep;
$("z-run").onclick = runSizes;
["t-ppt", "t-va", "t-vb"].forEach((id) => ($(id).oninput = runThreshold));
runThreshold();
