import init, { Session, compare_variants } from "./pkg/adini_web.js";

const $ = (id) => document.getElementById(id);
let session = null;
let view = null;

function status(msg) {
  $("status").textContent = msg || "";
}

// blue to yellow through teal and green
function colour(t) {
  const stops = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];
  const x = Math.min(Math.max(t, 0), 1) * (stops.length - 1);
  const i = Math.min(Math.floor(x), stops.length - 2);
  const f = x - i;
  const c = stops[i].map((a, k) => Math.round(a + f * (stops[i + 1][k] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

function drawMesh() {
  const cv = $("mesh");
  const g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  if (!view) return;
  const [x0, x1, y0, y1] = view.bbox;
  const pad = 10;
  const s = Math.min((cv.width - 2 * pad) / (x1 - x0), (cv.height - 2 * pad) / (y1 - y0));
  const X = (x) => pad + (x - x0) * s;
  const Y = (y) => cv.height - pad - (y - y0) * s;
  const mode = $("colour").value;
  const vals = view.cells.map((c) => (mode === "eta" ? Math.log10(c.eta + 1e-300) : c.u));
  const solved = view.cells.some((c) => c.eta > 0 || c.u !== 0);
  let lo = Math.min(...vals);
  let hi = Math.max(...vals);
  if (mode === "eta") lo = Math.max(lo, hi - 6);
  for (const [k, c] of view.cells.entries()) {
    const [a, b, p, q] = c.b;
    g.fillStyle = solved ? colour((vals[k] - lo) / (hi - lo || 1)) : "#f4f4f4";
    g.fillRect(X(a), Y(q), (b - a) * s, (q - p) * s);
    g.strokeStyle = c.marked ? "#e33" : "rgba(0,0,0,0.45)";
    g.lineWidth = c.marked ? 1.5 : 0.5;
    g.strokeRect(X(a), Y(q), (b - a) * s, (q - p) * s);
  }
  g.fillStyle = "#d00";
  for (const [x, y] of view.hanging) {
    g.beginPath();
    g.arc(X(x), Y(y), 2, 0, 2 * Math.PI);
    g.fill();
  }
}

function showHistory() {
  const body = $("history").tBodies[0];
  body.innerHTML = "";
  (view?.history || []).forEach((r, k) => {
    const tr = body.insertRow();
    for (const v of [k, r.ndof, r.error.toExponential(4), r.eta.toExponential(4)]) {
      tr.insertCell().textContent = v;
    }
  });
}

function guarded(f) {
  return () => {
    status("");
    try {
      f();
    } catch (e) {
      status(String(e.message || e));
    }
  };
}

function solve() {
  view = JSON.parse(session.solve());
  drawMesh();
  showHistory();
}

function reset() {
  session?.free();
  session = new Session($("problem").value, $("variant").value);
  solve();
}

function plotComparison(d) {
  const cv = $("plot");
  const g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const pts = [...d.averaging, ...d.hard].filter((v) => v > 0);
  const lx = d.sqrt_ndof.map(Math.log10);
  const [xa, xb] = [Math.min(...lx), Math.max(...lx)];
  const [ya, yb] = [Math.log10(Math.min(...pts)), Math.log10(Math.max(...pts))];
  const pad = 40;
  const X = (v) => pad + ((Math.log10(v) - xa) / (xb - xa || 1)) * (cv.width - 2 * pad);
  const Y = (v) => cv.height - pad - ((Math.log10(v) - ya) / (yb - ya || 1)) * (cv.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, cv.width - 2 * pad, cv.height - 2 * pad);
  g.fillStyle = "#555";
  g.font = "12px system-ui";
  g.fillText("log error vs log sqrt(ndof)", pad, pad - 8);
  for (const [series, col] of [[d.averaging, "#1f6fb4"], [d.hard, "#d2691e"]]) {
    g.strokeStyle = col;
    g.fillStyle = col;
    g.lineWidth = 2;
    g.beginPath();
    series.forEach((e, k) => (k ? g.lineTo(X(d.sqrt_ndof[k]), Y(e)) : g.moveTo(X(d.sqrt_ndof[k]), Y(e))));
    g.stroke();
    series.forEach((e, k) => g.fillRect(X(d.sqrt_ndof[k]) - 3, Y(e) - 3, 6, 6));
  }
  g.fillStyle = "#1f6fb4";
  g.fillText("averaging", cv.width - pad - 110, pad + 16);
  g.fillStyle = "#d2691e";
  g.fillText("hard", cv.width - pad - 110, pad + 32);
}

function compare() {
  const d = JSON.parse(compare_variants($("driver").value, Number($("levels").value)));
  const body = $("comparison").tBodies[0];
  body.innerHTML = "";
  d.sqrt_ndof.forEach((s, k) => {
    const tr = body.insertRow();
    for (const v of [s.toFixed(2), d.averaging[k].toExponential(4), d.hard[k].toExponential(4)]) {
      tr.insertCell().textContent = v;
    }
  });
  plotComparison(d);
}

await init();
$("reset").onclick = guarded(reset);
$("problem").onchange = guarded(reset);
$("variant").onchange = guarded(reset);
$("adaptive").onclick = guarded(() => {
  session.refine_adaptive(Number($("theta").value));
  solve();
});
$("uniform").onclick = guarded(() => {
  session.refine_uniform();
  solve();
});
$("colour").onchange = drawMesh;
$("compare").onclick = guarded(() => {
  status("computing...");
  setTimeout(guarded(compare), 10);
});
guarded(reset)();
