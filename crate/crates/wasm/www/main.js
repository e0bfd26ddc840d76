import init, { fit, sample, planted_example } from "./pkg/plca_wasm.js";

const $ = (id) => document.getElementById(id);
let model = null;

function heatmap(canvas, rows) {
  const ctx = canvas.getContext("2d");
  const h = rows.length, w = rows[0].length;
  const max = Math.max(...rows.flat(), 1e-300);
  const cw = canvas.width / w, ch = canvas.height / h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  rows.forEach((row, i) => row.forEach((v, j) => {
    const shade = Math.round(255 * (1 - v / max));
    ctx.fillStyle = `rgb(${shade},${shade},255)`;
    ctx.fillRect(j * cw, i * ch, Math.ceil(cw), Math.ceil(ch));
  }));
}

function curve(canvas, values) {
  const ctx = canvas.getContext("2d");
  const pad = 10;
  const lo = Math.min(...values), hi = Math.max(...values);
  const span = hi - lo || 1;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = pad + (canvas.width - 2 * pad) * (values.length > 1 ? i / (values.length - 1) : 0);
    const y = pad + (canvas.height - 2 * pad) * (hi - v) / span;
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.strokeStyle = "#235";
  ctx.stroke();
}

function guarded(action) {
  return () => {
    $("error").textContent = "";
    try {
      action();
    } catch (e) {
      $("error").textContent = e.message ?? String(e);
    }
  };
}

function num(id) {
  return Number($(id).value);
}

$("example").onclick = () => { $("matrix").value = planted_example(); };

$("fit").onclick = guarded(() => {
  const out = JSON.parse(fit($("matrix").value, num("k"), num("seed"), num("restarts"), num("iters")));
  model = out.model;
  $("sample").disabled = false;
  $("summary").textContent =
    `M=${out.dims.M} N=${out.dims.N} K=${out.dims.K}\n` +
    `fobj=${out.fobj} kld=${out.kld}\n` +
    `${out.iterations} iterations (${out.termination}), best seed ${out.best_seed}`;
  heatmap($("input"), out.input);
  heatmap($("reconstruction"), out.reconstruction);
  heatmap($("components"), out.components);
  heatmap($("mixture"), out.mixture);
  curve($("trace"), out.trace);
});

$("sample").onclick = guarded(() => {
  const out = JSON.parse(sample(model, num("n"), num("sample-seed")));
  heatmap($("counts"), out.counts);
  $("sample-summary").textContent =
    `kld(empirical || model)=${out.kld}\n` +
    `sample log-likelihood=${out.sample_loglik}\n` +
    `expected log-likelihood=${out.expected_loglik}`;
});

await init();
$("matrix").value = planted_example();
