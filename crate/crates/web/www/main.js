import init, { schedule_curve, anneal_trajectory, spectrum_scan } from "./pkg/cdanneal_web.js";

const $ = (id) => document.getElementById(id);
const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

// Draws each series in `ys` against `xs`, sharing axes.
function plot(canvas, xs, ys, yMax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 5, w - pad - 5, h - pad - 5);
  ctx.fillStyle = "#555";
  ctx.fillText("0", pad - 12, h - pad + 3);
  ctx.fillText(yMax.toPrecision(2), 2, 12);
  ctx.fillText(xs[xs.length - 1].toPrecision(3), w - 30, h - 12);
  const x0 = xs[0], dx = xs[xs.length - 1] - x0 || 1;
  const px = (x) => pad + ((x - x0) / dx) * (w - pad - 5);
  const py = (y) => h - pad - (y / yMax) * (h - pad - 10);
  ys.forEach((series, k) => {
    ctx.strokeStyle = colors[k % colors.length];
    ctx.beginPath();
    series.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  });
}

function run() {
  const n = Number($("n").value), p = Number($("p").value);
  const T = Number($("T").value), dt = Number($("dt").value);
  const ansatz = $("ansatz").value, order = Number($("order").value);
  try {
    const points = 201;
    const lambdas = schedule_curve(T, points);
    const ts = Array.from({ length: points }, (_, k) => (T * k) / (points - 1));
    plot($("schedule"), ts, [lambdas], 1);

    const started = performance.now();
    const traj = anneal_trajectory(n, p, ansatz, order, T, dt);
    plot($("pgs"), Array.from(traj.times), [Array.from(traj.pgs)], 1);
    const secs = ((performance.now() - started) / 1000).toFixed(2);

    const levels = Math.min(4, n + 1);
    const flat = spectrum_scan(n, p, points, levels);
    const ls = Array.from({ length: points }, (_, k) => k / (points - 1));
    const rows = Array.from({ length: levels }, (_, j) => ls.map((_, i) => flat[i * levels + j]));
    plot($("spectrum"), ls, rows, Math.max(...flat) || 1);

    $("status").textContent = `F = ${traj.fidelity.toFixed(6)} (${secs} s)`;
    traj.free();
  } catch (e) {
    $("status").textContent = `error: ${e.message ?? e}`;
  }
}

await init();
$("run").addEventListener("click", run);
run();
