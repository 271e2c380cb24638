import init, { greedy_layout, void_curve, gap_bracket_curve } from "./pkg/voidplace_wasm.js";

const $ = (id) => document.getElementById(id);

function scenario() {
  const v = (id) => Number($(id).value);
  return {
    n_cells: 100,
    spacing_m: 50,
    baseline_rate: 0.002,
    bumps: [
      { center_m: 1500, width_m: 150, peak_rate: 0.2 },
      { center_m: 3500, width_m: 200, peak_rate: 0.14 },
    ],
    sigma2: v("sigma2"),
    beta_m: 300,
    rho: v("rho"),
    sigma_l: v("sigma_l"),
    horizon_ratio: v("horizon_ratio"),
    sensors: v("sensors"),
    samples: v("samples"),
    seed: 1,
  };
}

function frame(canvas, xmin, xmax, ymin, ymax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(xmin.toPrecision(3), pad, h - 14);
  ctx.fillText(xmax.toPrecision(3), w - 40, h - 14);
  ctx.fillText(ymax.toPrecision(3), 2, 16);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  const X = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (w - pad - 8);
  const Y = (y) => h - pad - ((y - ymin) / (ymax - ymin || 1)) * (h - pad - 16);
  return { ctx, X, Y };
}

function line(f, xs, ys, color, dash = []) {
  f.ctx.strokeStyle = color;
  f.ctx.setLineDash(dash);
  f.ctx.beginPath();
  xs.forEach((x, i) => (i ? f.ctx.lineTo(f.X(x), f.Y(ys[i])) : f.ctx.moveTo(f.X(x), f.Y(ys[i]))));
  f.ctx.stroke();
  f.ctx.setLineDash([]);
}

function drawLayout(l) {
  const xs = l.positions_m;
  const top = Math.max(...l.lambda_bar) * 1.1;
  const f = frame($("layout"), xs[0], xs[xs.length - 1], 0, top);
  line(f, xs, l.lambda_bar, "#1f5fa8");
  line(f, xs, l.miss.map((m) => m * top), "#888", [4, 3]);
  f.ctx.fillStyle = "#c0392b";
  l.sensor_positions_m.forEach((p, i) => {
    f.ctx.fillRect(f.X(p) - 2, f.Y(0) - 10, 4, 10);
    f.ctx.fillText(String(i + 1), f.X(p) - 3, f.Y(0) - 13);
  });
}

function drawCurve(rows) {
  const m = rows.map((r) => r.m);
  const f = frame($("curve"), 0, Math.max(1, m[m.length - 1]), 0, 1);
  line(f, m, rows.map((r) => r.lower_bound), "#1f5fa8", [5, 3]);
  line(f, m, rows.map((r) => Math.min(1, r.lower_bound + r.gap_bound)), "#2e8b57", [2, 3]);
  line(f, m, rows.map((r) => r.vp_mc), "#c0392b");
  f.ctx.strokeStyle = "#c0392b";
  rows.forEach((r) => {
    f.ctx.beginPath();
    f.ctx.moveTo(f.X(r.m), f.Y(r.vp_mc - 3 * r.vp_se));
    f.ctx.lineTo(f.X(r.m), f.Y(r.vp_mc + 3 * r.vp_se));
    f.ctx.stroke();
  });
}

function drawGap() {
  const mu = Number($("mu").value);
  const s2 = Number($("s2").value);
  const b = JSON.parse(gap_bracket_curve(mu, s2, 800));
  const top = Math.max(...b.bracket, 1e-12) * 1.1;
  const f = frame($("gap"), 0, b.lambda[b.lambda.length - 1], 0, top);
  line(f, b.lambda, b.bracket, "#1f5fa8");
  line(f, [0, b.lambda[b.lambda.length - 1]], [b.bound, b.bound], "#c0392b", [4, 3]);
  $("gapinfo").textContent =
    `numeric supremum ${b.sup.toPrecision(6)} at Λ̃ = ${b.argmax}, closed-form bound ${b.bound.toPrecision(6)}`;
}

function showValues(root) {
  root.querySelectorAll("label").forEach((l) => {
    l.querySelector("output").textContent = l.querySelector("input").value;
  });
}

let pending = 0;
function update() {
  showValues($("scenario"));
  clearTimeout(pending);
  pending = setTimeout(() => {
    const s = JSON.stringify(scenario());
    try {
      const t0 = performance.now();
      drawLayout(JSON.parse(greedy_layout(s)));
      const t1 = performance.now();
      drawCurve(JSON.parse(void_curve(s)));
      const t2 = performance.now();
      $("status").className = "";
      $("status").textContent = `greedy ${(t1 - t0).toFixed(1)} ms, Monte Carlo curve ${(t2 - t1).toFixed(0)} ms`;
    } catch (e) {
      $("status").className = "err";
      $("status").textContent = String(e);
    }
  }, 60);
}

await init();
$("scenario").addEventListener("input", update);
$("bracket").addEventListener("input", () => {
  showValues($("bracket"));
  drawGap();
});
showValues($("bracket"));
update();
drawGap();
