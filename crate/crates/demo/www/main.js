import init, { cantor_curves, explore_instance, rubio_profile } from "./pkg/twoweight_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
}

// series: [{ xs, ys, color }]; logX plots against log(x)
function plotLines(canvas, series, { logX = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  axes(ctx, w, h, pad);
  const tx = (x) => (logX ? Math.log(x) : x);
  const xs = series.flatMap((s) => s.xs.map(tx));
  const ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const y1 = Math.max(...ys, 1e-12);
  const px = (x) => pad + ((tx(x) - x0) / (x1 - x0 || 1)) * (w - 1.5 * pad);
  const py = (y) => h - pad - (y / y1) * (h - 1.5 * pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
  }
  ctx.fillStyle = "#444";
  ctx.fillText(y1.toPrecision(4), 2, pad / 2 + 8);
  ctx.fillText(String(series[0].xs.at(-1)), w - pad, h - pad + 14);
}

// leaf bars, each series a row of bars of width proportional to μ
function plotLeaves(canvas, widths, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  axes(ctx, w, h, pad);
  const total = widths.reduce((a, b) => a + b, 0) || 1;
  const top = Math.max(...series.flatMap((s) => s.values), 1e-12);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    let x = pad;
    s.values.forEach((v, i) => {
      const dx = (widths[i] / total) * (w - 1.5 * pad);
      const y = h - pad - (v / top) * (h - 1.5 * pad);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
      ctx.lineTo(x + dx, y);
      x += dx;
    });
    ctx.stroke();
  }
  ctx.fillStyle = "#444";
  ctx.fillText(top.toPrecision(4), 2, pad / 2 + 8);
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function drawCantor() {
  const out = $("c-out");
  guard(out, () => {
    const doc = JSON.parse(cantor_curves(num("c-p"), num("c-q"), num("c-r"), num("c-n")));
    const xs = doc.rows.map((r) => r.depth);
    const p = num("c-p");
    plotLines(
      $("c-canvas"),
      [
        { xs, ys: doc.rows.map((r) => r.c1), color: "#1f77b4" },
        { xs, ys: doc.rows.map((r) => r.f_norm ** p), color: "#2ca02c" },
        { xs, ys: doc.rows.map((r) => r.lhs_lower), color: "#d62728" },
        { xs, ys: doc.lhs, color: "#ff7f0e" },
      ],
      { logX: true },
    );
    const last = doc.rows.at(-1);
    out.textContent =
      `depth ${last.depth}: C₁ = ${last.c1.toFixed(4)}, ‖f‖_p = ${last.f_norm.toFixed(4)}, ` +
      `lower bound = ${last.lhs_lower.toFixed(4)}, ‖T_α f‖^p = ${doc.lhs.at(-1).toFixed(4)}\n` +
      `predicted growth exponent: ${doc.predicted_exponent ?? "none (r ≥ 1/q)"}; C₁ insufficient: ${doc.c1_insufficient}`;
  });
}

function drawExplorer() {
  const out = $("e-out");
  guard(out, () => {
    const doc = JSON.parse(
      explore_instance(num("e-seed"), num("e-b"), num("e-d"), num("e-p"), num("e-q"), num("e-r")),
    );
    const widths = doc.mu.map(() => 1);
    const norm = (v) => {
      const m = Math.max(...v, 1e-300);
      return v.map((x) => x / m);
    };
    plotLeaves($("e-canvas"), widths, [
      { values: norm(doc.mu), color: "#1f77b4" },
      { values: norm(doc.nu), color: "#2ca02c" },
      { values: norm(doc.witness), color: "#d62728" },
    ]);
    const r = doc.report;
    out.textContent =
      `${doc.leaves} leaves\nC₁ = ${r.c1}\nC₂ = ${r.c2}\nnorm estimate = ${r.norm_estimate} (${r.method}, converged ${r.converged})\n` +
      `verdict: ${r.verdict.kind}, estimate/(C₁+C₂) = ${r.ratio}`;
  });
}

function drawRubio() {
  const out = $("r-out");
  guard(out, () => {
    const doc = JSON.parse(
      rubio_profile(num("r-seed"), num("r-b"), num("r-d"), num("r-p"), num("r-q"), num("r-f")),
    );
    plotLeaves($("r-canvas"), doc.mu, [
      { values: doc.f, color: "#7f7f7f" },
      { values: doc.maximal, color: "#1f77b4" },
      { values: doc.majorant, color: "#d62728" },
    ]);
    out.textContent =
      `series truncated after ${doc.truncation_k} terms; ‖F‖_p/‖f‖_p = ${doc.norm_ratio.toFixed(4)}; ` +
      `A1 constant ${doc.a1_constant.toFixed(4)} (bound ${doc.a1_bound.toFixed(4)})`;
  });
}

await init();
for (const [section, draw] of [["cantor", drawCantor], ["explore", drawExplorer], ["rubio", drawRubio]]) {
  $(section).addEventListener("input", draw);
  draw();
}
