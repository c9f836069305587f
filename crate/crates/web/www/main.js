import init, { pairGrid, projectReport, merge } from "./pkg/coherence_web.js";

const $ = (id) => document.getElementById(id);
const numbers = (text) => text.split(/[\s,]+/).filter((t) => t.length > 0).map(Number);

function drawGrid() {
  const steps = Number($("grid-steps").value);
  const loss = $("grid-loss").value;
  const values = pairGrid(loss, steps);
  const n = steps + 1;
  const canvas = $("grid");
  const ctx = canvas.getContext("2d");
  const image = ctx.createImageData(n, n);
  const finite = Array.from(values).filter(Number.isFinite);
  const top = Math.log1p(Math.max(...finite, 1e-12));
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const v = values[i * n + j];
      // q_E runs left to right, q_notE bottom to top
      const k = 4 * ((n - 1 - j) * n + i);
      const shade = Number.isFinite(v) ? 255 * (1 - Math.log1p(v) / top) : 0;
      image.data[k] = shade;
      image.data[k + 1] = shade;
      image.data[k + 2] = Number.isFinite(v) ? 255 : 80;
      image.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  canvas.onmousemove = (e) => {
    const i = Math.min(n - 1, Math.floor((e.offsetX / canvas.width) * n));
    const j = Math.min(n - 1, Math.floor((1 - e.offsetY / canvas.height) * n));
    const v = values[i * n + j];
    $("grid-readout").textContent =
      `q(E) = ${(i / steps).toFixed(3)}, q(not E) = ${(j / steps).toFixed(3)}, L* = ${Number.isFinite(v) ? v.toFixed(5) : "infinite"}`;
  };
}

function runProjection() {
  const out = $("project-out");
  try {
    const report = JSON.parse(projectReport($("rows").value, new Float64Array(numbers($("credences").value)), $("project-loss").value));
    const fmt = (xs) => xs.map((x) => x.toFixed(4)).join(", ");
    let text = `coherent beliefs  ${fmt(report.p_star)}\nincoherence       ${report.incoherence.toExponential(4)}\n`;
    if (report.dutch_book) {
      const b = report.dutch_book;
      text += `\nDutch book\nstakes (events, then sure event)  ${fmt(b.stakes)}\npayout per atom  ${fmt(b.payouts)}\ncost  ${b.cost.toFixed(4)}`;
    } else {
      text += "\nno Dutch book: the credences are coherent";
    }
    out.className = "";
    out.textContent = text;
  } catch (err) {
    out.className = "error";
    out.textContent = String(err.message ?? err);
  }
}

function runMerge() {
  const out = $("merge-out");
  try {
    const q1 = numbers($("q1").value);
    const q2 = numbers($("q2").value);
    const p = merge(new Float64Array(q1), new Float64Array(q2), $("method").value, $("merge-loss").value);
    const s1 = q1.reduce((a, b) => a + b, 0);
    const s2 = q2.reduce((a, b) => a + b, 0);
    const rows = Array.from(p, (x, k) =>
      `<tr><td>${String.fromCharCode(97 + k)}</td><td>${(q1[k] / s1).toFixed(3)}</td><td>${(q2[k] / s2).toFixed(3)}</td><td>${x.toFixed(3)}</td></tr>`);
    out.innerHTML = `<table><tr><th>letter</th><th>first</th><th>second</th><th>merged</th></tr>${rows.join("")}</table>`;
  } catch (err) {
    out.innerHTML = `<p class="error">${String(err.message ?? err)}</p>`;
  }
}

await init();
$("grid-loss").onchange = drawGrid;
$("grid-steps").oninput = drawGrid;
$("project").onclick = runProjection;
$("merge").onclick = runMerge;
drawGrid();
