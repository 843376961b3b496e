import init, { depthMap, superchargeShot, assemblyCurves } from "./pkg/dualarray_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guarded(outId, fn) {
  return () => {
    const out = $(outId);
    out.classList.remove("err");
    try {
      fn(out);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  };
}

function cellGrid(canvas, rows, cols, color) {
  const ctx = canvas.getContext("2d");
  const s = Math.min(canvas.width / cols, canvas.height / rows);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const fill = color(r * cols + c);
      if (fill) {
        ctx.fillStyle = fill;
        ctx.fillRect(c * s, r * s, s, s);
      }
    }
  }
  return { ctx, s };
}

function drawDepth() {
  const m = JSON.parse(depthMap(num("d-n"), num("d-w"), num("d-min")));
  cellGrid($("d-canvas"), m.rows, m.cols, (i) => {
    const v = Math.round(255 * m.ratios[i]);
    return m.sufficient[i] ? `rgb(${255 - v},${255 - v / 2},255)` : `rgb(${255 - v / 3},${255 - v / 3},${255 - v / 3})`;
  });
  $("d-out").textContent = `${m.sufficient_count} of ${m.rows * m.cols} sites at or above the depth threshold`;
}

function drawShot() {
  const s = JSON.parse(
    superchargeShot(num("s-seed"), num("s-p"), num("s-k"), num("s-pi"), $("s-adj").checked),
  );
  const paint = (canvas, main, stage) => {
    const { ctx, s: px } = cellGrid(canvas, s.rows, s.cols, (i) =>
      main[i] ? (s.region[i] ? "#1f77b4" : "#9ab") : s.region[i] ? "#fde2e2" : null,
    );
    // Secondary atoms sit half a pitch down and right of their main neighbour.
    ctx.fillStyle = "#d62728";
    s.secondary_before.forEach((on, i) => {
      if (on && stage !== "after") {
        const r = Math.floor(i / s.cols), c = i % s.cols;
        ctx.beginPath();
        ctx.arc((c + 1) * px, (r + 1) * px, px * 0.18, 0, 2 * Math.PI);
        ctx.fill();
      }
    });
    if (stage === "after") {
      ctx.strokeStyle = "#2ca02c";
      ctx.lineWidth = 1.5;
      for (const [src, dst] of s.moves) {
        const sr = Math.floor(src / s.cols), sc = src % s.cols;
        const dr = Math.floor(dst / s.cols), dc = dst % s.cols;
        ctx.beginPath();
        ctx.moveTo((sc + 1) * px, (sr + 1) * px);
        ctx.lineTo((dc + 0.5) * px, (dr + 0.5) * px);
        ctx.stroke();
      }
    }
  };
  paint($("s-before"), s.main_before, "before");
  paint($("s-after"), s.main_after, "after");
  $("s-out").textContent =
    `defects ${s.defects}, planned ${s.planned} (maximum matching ${s.max_matching}), inserted ${s.inserted}\n` +
    `region filling ${s.fill_before.toFixed(3)} -> ${s.fill_after.toFixed(3)}`;
}

function lineChart(canvas, series, yLabel) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 44, B = 28, T = 10, R = 10;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, W, H);
  const n = Math.max(...series.map((s) => s.values.length));
  const x = (i) => L + ((W - L - R) * i) / Math.max(1, n - 1);
  const y = (v) => T + (H - T - B) * (1 - v);
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let k = 0; k <= 4; k++) {
    const v = k / 4;
    ctx.beginPath();
    ctx.moveTo(L, y(v));
    ctx.lineTo(W - R, y(v));
    ctx.stroke();
    ctx.fillText(v.toFixed(2), 6, y(v) + 4);
  }
  ctx.fillText(`${yLabel} vs cycle (1..${n})`, L, H - 8);
  series.forEach((s, j) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, W - R - 110, T + 14 + 14 * j);
  });
}

function drawCurves() {
  const args = [num("a-seed"), num("a-trials"), num("a-cycles"), num("a-k")];
  const on = JSON.parse(assemblyCurves(...args, true));
  const off = JSON.parse(assemblyCurves(...args, false));
  lineChart($("a-success"), [
    { label: "with supercharge", color: "#1f77b4", values: on.cumulative_success },
    { label: "without", color: "#d62728", values: off.cumulative_success },
  ], "cumulative success");
  lineChart($("a-fill"), [
    { label: "with supercharge", color: "#1f77b4", values: on.mean_fill },
    { label: "without", color: "#d62728", values: off.mean_fill },
  ], "target filling");
  const last = (a) => a[a.length - 1].toFixed(3);
  $("a-out").textContent =
    `initial filling ${on.initial_fill.toFixed(3)} with, ${off.initial_fill.toFixed(3)} without\n` +
    `cumulative success after ${on.cycles} cycles: ${last(on.cumulative_success)} with, ${last(off.cumulative_success)} without\n` +
    `first-cycle duration ${on.mean_duration_ms[0].toFixed(1)} ms with, ${off.mean_duration_ms[0].toFixed(1)} ms without`;
}

await init();
$("status").textContent = "ready";
$("d-go").onclick = guarded("d-out", drawDepth);
$("s-go").onclick = guarded("s-out", drawShot);
$("a-go").onclick = guarded("a-out", drawCurves);
guarded("d-out", drawDepth)();
guarded("s-out", drawShot)();
