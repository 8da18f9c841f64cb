import init, { check, optimize, landscape } from "./pkg/maris_demo.js";

const $ = (id) => document.getElementById(id);
const status = (text) => { $("status").textContent = text; };

function scenario() {
  const base = {
    antennas: Number($("m").value),
    ris_elements: Number($("n").value),
    users: Number($("k").value),
    p0_dbm: Number($("p0").value),
  };
  let extra = {};
  try {
    extra = JSON.parse($("extra").value || "{}");
  } catch (e) {
    throw new Error("extra JSON: " + e.message);
  }
  return JSON.stringify({ ...base, ...extra });
}

const seed = () => BigInt($("seed").value || 0);

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(40, 10, w - 50, h - 40);
}

function plotLine(canvas, xs, ys, xlabel, log) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  axes(ctx, w, h);
  const vals = log ? ys.map((v) => Math.log10(Math.max(v, 1e-30))) : ys;
  const lo = Math.min(...vals), hi = Math.max(...vals);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const px = (x) => 40 + ((x - x0) / (x1 - x0 || 1)) * (w - 50);
  const py = (y) => h - 30 - ((y - lo) / (hi - lo || 1)) * (h - 40);
  ctx.strokeStyle = "#1f6feb";
  ctx.beginPath();
  vals.forEach((v, i) => (i ? ctx.lineTo(px(xs[i]), py(v)) : ctx.moveTo(px(xs[i]), py(v))));
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(xlabel, w / 2 - 20, h - 8);
  ctx.fillText((log ? "1e" : "") + hi.toFixed(log ? 1 : 3), 2, 18);
  ctx.fillText((log ? "1e" : "") + lo.toFixed(log ? 1 : 3), 2, h - 30);
  return px;
}

function drawRegion(layout, side) {
  const canvas = $("region");
  const ctx = canvas.getContext("2d");
  const s = canvas.width;
  ctx.clearRect(0, 0, s, s);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(10, 10, s - 20, s - 20);
  const map = (v) => 10 + ((v + side / 2) / side) * (s - 20);
  ctx.fillStyle = "#d1242f";
  for (const [x, y] of layout) {
    ctx.beginPath();
    ctx.arc(map(x), s - map(y), 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawHeatmap(data) {
  const canvas = $("region");
  const ctx = canvas.getContext("2d");
  const n = data.points, s = canvas.width;
  const logs = data.gain.map((g) => Math.log10(Math.max(g, 1e-30)));
  const lo = Math.min(...logs), hi = Math.max(...logs);
  const img = ctx.createImageData(n, n);
  for (let row = 0; row < n; row++) {
    for (let col = 0; col < n; col++) {
      const t = (logs[row * n + col] - lo) / (hi - lo || 1);
      const o = ((n - 1 - row) * n + col) * 4;
      img.data[o] = Math.round(255 * t);
      img.data[o + 1] = Math.round(80 + 120 * (1 - Math.abs(2 * t - 1)));
      img.data[o + 2] = Math.round(255 * (1 - t));
      img.data[o + 3] = 255;
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = n;
  tmp.height = n;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, s, s);
  ctx.drawImage(tmp, 0, 0, s, s);
  return [lo, hi];
}

function run(label, fn) {
  status(label + "…");
  setTimeout(() => {
    try {
      fn();
    } catch (e) {
      status("error: " + (e.message || e));
    }
  }, 20);
}

$("check").onclick = () => run("checking", () => {
  const r = JSON.parse(check(scenario(), seed()));
  status(r.feasible
    ? `feasible; initial min-gain ${r.initial_min_gain.toExponential(4)} W`
    : `infeasible (${r.reason})` + (r.required_power_dbm != null
      ? `: needs ${r.required_power_dbm.toFixed(2)} dBm, budget ${r.budget_dbm.toFixed(2)} dBm` : ""));
});

$("optimize").onclick = () => run("optimizing", () => {
  const t0 = performance.now();
  const r = JSON.parse(optimize(scenario(), seed(), $("scheme").value, 361));
  const secs = ((performance.now() - t0) / 1000).toFixed(1);
  const px = plotLine($("pattern"), r.theta_deg, r.gain, "angle (deg), gain in log scale", true);
  const ctx = $("pattern").getContext("2d");
  ctx.strokeStyle = "#aaa";
  for (const a of [-30, 0, 30]) {
    ctx.beginPath();
    ctx.moveTo(px(a), 10);
    ctx.lineTo(px(a), $("pattern").height - 30);
    ctx.stroke();
  }
  plotLine($("trace"), r.trajectory.map((_, i) => i), r.trajectory, "outer iteration, min-gain", false);
  drawRegion(r.layout, r.region_side);
  status(`${r.scheme}: min-gain ${r.min_gain.toExponential(4)} W after ${r.iterations} iterations` +
    ` (${r.converged ? "converged" : "cap reached"}), SINR ${r.sinr.map((s) => s.toFixed(2)).join(", ")}, ${secs} s`);
});

$("landscape").onclick = () => run("sampling", () => {
  const r = JSON.parse(landscape(scenario(), seed(), 121));
  const [lo, hi] = drawHeatmap(r);
  status(`channel power over the ${r.region_side.toFixed(2)} m region: 1e${lo.toFixed(2)} to 1e${hi.toFixed(2)}`);
});

init().then(() => status("ready"), (e) => status("failed to load the module: " + e));
