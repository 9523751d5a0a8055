import init, { explore_orbit, run_chain, acceptance_curve } from "./pkg/nurs_demo.js";

const $ = (id) => document.getElementById(id);
const state = { x: 0.5, y: -0.5 };

// plot window per target, [xmin, xmax, ymin, ymax]
const VIEW = {
  correlated: [-3.5, 3.5, -3, 3],
  "ill-conditioned": [-3.5, 3.5, -0.5, 0.5],
  funnel: [-6, 6, -6, 6],
};

function params() {
  return {
    target: $("target").value,
    h: Number($("h").value),
    eps: Number($("eps").value),
    m: Number($("m").value),
    seed: BigInt(Math.max(0, Math.floor(Number($("seed").value)))),
  };
}

function call(f) {
  try {
    $("status").textContent = "";
    return JSON.parse(f());
  } catch (e) {
    $("status").textContent = String(e.message ?? e);
    return null;
  }
}

function frame(canvas, view) {
  const ctx = canvas.getContext("2d");
  const [x0, x1, y0, y1] = view;
  const sx = (x) => ((x - x0) / (x1 - x0)) * canvas.width;
  const sy = (y) => canvas.height - ((y - y0) / (y1 - y0)) * canvas.height;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(sx(0), 0); ctx.lineTo(sx(0), canvas.height);
  ctx.moveTo(0, sy(0)); ctx.lineTo(canvas.width, sy(0));
  ctx.stroke();
  return { ctx, sx, sy };
}

function dot(ctx, x, y, r, color) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function drawOrbit() {
  const p = params();
  const v = call(() => explore_orbit(p.target, state.x, state.y, p.h, p.eps, p.m, p.seed));
  const { ctx, sx, sy } = frame($("orbit"), VIEW[p.target]);
  dot(ctx, sx(state.x), sy(state.y), 4, "#000");
  if (!v) return;
  const pmax = Math.max(...v.probabilities);
  v.points.forEach(([x, y], k) => {
    const r = 1.5 + 6 * Math.sqrt(v.probabilities[k] / pmax);
    dot(ctx, sx(x), sy(y), r, "rgba(31,119,180,0.6)");
  });
  const [nx, ny] = v.next_state;
  ctx.strokeStyle = "#d62728";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(sx(nx), sy(ny), 9, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.lineWidth = 1;
  $("orbit-info").textContent =
    `orbit size ${v.points.length} after ${v.doublings} doublings (${v.termination}); ` +
    `shift ${v.shift.toFixed(4)} ${v.shift_accepted ? "accepted" : "rejected"}; ` +
    `selected index ${v.selected_index}, next state (${nx.toFixed(3)}, ${ny.toFixed(3)})`;
  return v;
}

function runChain() {
  const p = params();
  const steps = Math.floor(Number($("steps").value));
  const c = call(() => run_chain(p.target, $("kernel").value, state.x, state.y, p.h, p.eps, p.m, steps, p.seed));
  const { ctx, sx, sy } = frame($("chain"), VIEW[p.target]);
  if (!c) return;
  ctx.fillStyle = "rgba(31,119,180,0.35)";
  for (let i = 0; i < c.xs.length; i++) ctx.fillRect(sx(c.xs[i]) - 1, sy(c.ys[i]) - 1, 2, 2);
  $("chain-info").textContent =
    `${c.xs.length} steps; shift acceptance ${c.shift_acceptance.toFixed(3)}; ` +
    `mean orbit size ${c.mean_orbit_size.toFixed(1)}`;
}

function drawCurve() {
  const p = params();
  const c = call(() => acceptance_curve(p.target, 0.01, 5, 40, 8, 2000, p.seed));
  const canvas = $("accept");
  const lo = Math.log(0.01), hi = Math.log(5);
  const { ctx, sx, sy } = frame(canvas, [lo, hi, 0, 1.05]);
  if (!c) return;
  const line = (ys, color, dash) => {
    ctx.strokeStyle = color;
    ctx.setLineDash(dash);
    ctx.beginPath();
    ys.forEach((y, k) => (k ? ctx.lineTo : ctx.moveTo).call(ctx, sx(Math.log(c.h[k])), sy(y)));
    ctx.stroke();
    ctx.setLineDash([]);
  };
  line(c.shift, "#1f77b4", []);
  line(c.rwm, "#ff7f0e", []);
  if (c.shift_bound.length) {
    line(c.shift_bound, "#1f77b4", [5, 4]);
    line(c.rwm_bound, "#ff7f0e", [5, 4]);
  }
  ctx.fillStyle = "#555";
  [0.01, 0.1, 1].forEach((h) => ctx.fillText(`h=${h}`, sx(Math.log(h)) + 3, canvas.height - 4));
}

$("orbit").addEventListener("click", (ev) => {
  const canvas = $("orbit");
  const rect = canvas.getBoundingClientRect();
  const [x0, x1, y0, y1] = VIEW[params().target];
  state.x = x0 + ((ev.clientX - rect.left) / rect.width) * (x1 - x0);
  state.y = y1 - ((ev.clientY - rect.top) / rect.height) * (y1 - y0);
  drawOrbit();
});
$("step").addEventListener("click", () => {
  const v = drawOrbit();
  if (v) {
    [state.x, state.y] = v.next_state;
    $("seed").value = String(Number($("seed").value) + 1);
  }
});
$("run").addEventListener("click", runChain);
$("curve").addEventListener("click", drawCurve);
$("target").addEventListener("change", () => {
  state.x = 0.5; state.y = state.x * (params().target === "ill-conditioned" ? 0.1 : -1);
  drawOrbit();
});

await init();
drawOrbit();
