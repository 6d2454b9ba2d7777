import init, { runThresholding, estimateStability, steklovInterval } from "./pkg/thresholdopt_web.js";

const $ = (id) => document.getElementById(id);

function params() {
  return [
    $("objective").value,
    $("domain").value,
    Number($("n").value),
    Number($("v0").value),
    $("init").value,
    Number($("seed").value),
  ];
}

// Lattice values top row first, NaN outside the domain.
function drawField(canvas, values, nx, ny, color) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(nx, ny);
  let lo = Infinity, hi = -Infinity;
  for (const v of values) if (!Number.isNaN(v)) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi > lo ? hi - lo : 1;
  values.forEach((v, k) => {
    const [r, g, b] = Number.isNaN(v) ? [255, 255, 255] : color((v - lo) / span);
    img.data.set([r, g, b, 255], 4 * k);
  });
  const off = new OffscreenCanvas(nx, ny);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

const gray = (t) => { const c = Math.round(255 * (1 - t)); return [c, c, c]; };
const heat = (t) => [Math.round(255 * t), Math.round(80 + 100 * t * (1 - t)), Math.round(255 * (1 - t))];

function drawSeries(canvas, ys, { log = false, xs = null, marks = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 24;
  ctx.clearRect(0, 0, w, h);
  const f = (y) => (log ? Math.log10(Math.max(y, 1e-16)) : y);
  const vals = ys.map(f);
  const xv = xs ?? ys.map((_, k) => k);
  const [x0, x1] = [Math.min(...xv), Math.max(...xv)];
  const [y0, y1] = [Math.min(...vals), Math.max(...vals)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.strokeStyle = "#c33";
  for (const m of marks) { ctx.beginPath(); ctx.moveTo(px(m), pad); ctx.lineTo(px(m), h - pad); ctx.stroke(); }
  ctx.strokeStyle = "#236";
  ctx.beginPath();
  vals.forEach((y, k) => (k ? ctx.lineTo(px(xv[k]), py(y)) : ctx.moveTo(px(xv[k]), py(y))));
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(log ? `1e${y1.toFixed(1)}` : y1.toPrecision(3), 2, pad - 6);
  ctx.fillText(log ? `1e${y0.toFixed(1)}` : y0.toPrecision(3), 2, h - 6);
}

function report(id, fn) {
  try {
    fn();
  } catch (e) {
    $(id).textContent = `error: ${e}`;
  }
}

function run() {
  report("run-out", () => {
    const t0 = performance.now();
    const v = runThresholding(...params());
    const ms = performance.now() - t0;
    drawField($("control"), v.control, v.nx, v.ny, gray);
    drawSeries($("increments"), Array.from(v.increments), { log: true });
    const obj = v.objectives;
    $("run-out").textContent =
      `status ${v.status} after ${v.increments.length} iterations (${ms.toFixed(0)} ms)\n` +
      `objective ${obj[0].toPrecision(8)} -> ${obj[obj.length - 1].toPrecision(8)}`;
    v.free();
  });
}

function stability() {
  report("stability-out", () => {
    const p = params();
    const field = runThresholding(...p);
    const s = estimateStability(...p);
    const canvas = $("curve");
    drawField(canvas, field.switch, field.nx, field.ny, heat);
    const domain = p[1];
    const [xmin, xmax, ymin, ymax] = field.bounds;
    const sx = (x) => ((x - xmin) / (xmax - xmin)) * canvas.width;
    const sy = (y) => canvas.height - ((y - ymin) / (ymax - ymin)) * canvas.height;
    const ctx = canvas.getContext("2d");
    const [xs, ys, seg] = [s.curve_x, s.curve_y, s.segments];
    ctx.strokeStyle = "#000";
    ctx.lineWidth = 2;
    for (let k = 0; k < seg.length; k += 2) {
      ctx.beginPath();
      ctx.moveTo(sx(xs[seg[k]]), sy(ys[seg[k]]));
      ctx.lineTo(sx(xs[seg[k + 1]]), sy(ys[seg[k + 1]]));
      ctx.stroke();
    }
    if (domain === "interval") {
      for (const x of xs) { ctx.beginPath(); ctx.moveTo(sx(x), 0); ctx.lineTo(sx(x), canvas.height); ctx.stroke(); }
    }
    $("stability-out").textContent =
      `lambda0 ${s.lambda0.toPrecision(6)}, coercivity bound 1 - 1/lambda0 = ${s.coercivity_bound.toPrecision(4)}\n` +
      `${s.stable ? "stable" : "not certified"} (run ${s.status}, ${xs.length} interface points)`;
    field.free();
    s.free();
  });
}

function steklov() {
  const eps = Number($("eps").value);
  $("eps-value").textContent = eps.toFixed(2);
  report("steklov-out", () => {
    const s = steklovInterval(Number($("steklov-n").value), eps);
    drawSeries($("mode"), Array.from(s.mode), { xs: Array.from(s.x), marks: Array.from(s.interface) });
    const rel = (100 * (s.lambda0 - s.continuum)) / s.continuum;
    $("steklov-out").textContent =
      `lambda0 ${s.lambda0.toPrecision(6)}; (2 - eps)/eps = ${s.continuum.toPrecision(6)} (${rel.toFixed(2)}%); 2/eps = ${(2 / eps).toPrecision(6)}`;
    s.free();
  });
}

await init();
$("run").addEventListener("click", run);
$("stability").addEventListener("click", stability);
$("eps").addEventListener("input", steklov);
$("steklov-n").addEventListener("change", steklov);
run();
steklov();
