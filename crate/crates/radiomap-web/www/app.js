import init, { diffraction_sweep, Scene } from './pkg/radiomap_web.js';

const $ = (id) => document.getElementById(id);
const C = 299792458;

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.classList.add('err');
}

function clearError(el) {
  el.classList.remove('err');
}

// ------------------------------------------------------------ sweep

function drawSweep() {
  const canvas = $('sweep');
  const out = $('sweep-out');
  const ctx = canvas.getContext('2d');
  const edges = Number($('edges').value);
  const spacing = Number($('spacing').value);
  const lambda = C / (Number($('freq').value) * 1e9);
  const th = Number($('theta').value);
  const n = 301;
  let y;
  try {
    y = diffraction_sweep(edges, spacing, lambda, -th, th, n);
    clearError(out);
  } catch (e) {
    showError(out, e);
    return;
  }
  const w = canvas.width, h = canvas.height, pad = 40;
  const lo = Math.min(0, ...y), hi = Math.max(...y) + 1;
  const px = (k) => pad + (w - 2 * pad) * k / (n - 1);
  const py = (v) => h - pad - (h - 2 * pad) * (v - lo) / (hi - lo);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = '#ccc';
  ctx.beginPath();
  ctx.moveTo(px((n - 1) / 2), pad);
  ctx.lineTo(px((n - 1) / 2), h - pad);
  ctx.moveTo(pad, py(0));
  ctx.lineTo(w - pad, py(0));
  ctx.stroke();
  ctx.strokeStyle = '#1f5fa8';
  ctx.lineWidth = 2;
  ctx.beginPath();
  y.forEach((v, k) => (k ? ctx.lineTo(px(k), py(v)) : ctx.moveTo(px(k), py(v))));
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = '#222';
  ctx.fillText(`${hi.toFixed(1)} dB`, 2, py(hi) + 4);
  ctx.fillText('0 dB', 2, py(0) + 4);
  ctx.fillText(`-${th}`, pad - 10, h - pad + 16);
  ctx.fillText(`+${th} rad (per edge)`, w - pad - 90, h - pad + 16);
  ctx.fillText('grazing', px((n - 1) / 2) + 4, h - pad + 16);
  out.textContent = `excess loss at grazing: ${y[(n - 1) / 2].toFixed(3)} dB, at +${th} rad: ${y[n - 1].toFixed(2)} dB`;
}

// ------------------------------------------------------------ scene

const state = { scene: null, tx: null, users: [], relay: null };

function newScene() {
  const out = $('scene-out');
  try {
    state.scene?.free();
    state.scene = new Scene(BigInt($('seed').value), 32, 5.0, Number($('density').value), Number($('maxh').value));
    clearError(out);
  } catch (e) {
    state.scene = null;
    showError(out, e);
    return;
  }
  const side = state.scene.rows() * state.scene.cellSize();
  state.tx = { x: side / 2 + 0.3, y: side / 2 + 0.3 };
  state.users = [];
  state.relay = null;
  drawScene();
}

// world x runs down the rows, y across the columns
function toCanvas(x, y) {
  const c = $('scene-view');
  const side = state.scene.rows() * state.scene.cellSize();
  return [(y / side) * c.width, (x / side) * c.height];
}

function fromCanvas(px, py) {
  const c = $('scene-view');
  const side = state.scene.rows() * state.scene.cellSize();
  return { x: (py / c.height) * side, y: (px / c.width) * side };
}

function colour(t) {
  // dark blue (strong) to pale yellow (weak)
  const a = [20, 40, 110], b = [250, 240, 170];
  return a.map((v, i) => Math.round(v + (b[i] - v) * t));
}

function marker(ctx, x, y, fill, label) {
  const [cx, cy] = toCanvas(x, y);
  ctx.fillStyle = fill;
  ctx.strokeStyle = '#000';
  ctx.beginPath();
  ctx.arc(cx, cy, 6, 0, 2 * Math.PI);
  ctx.fill();
  ctx.stroke();
  ctx.fillStyle = '#000';
  ctx.fillText(label, cx + 8, cy - 8);
}

function drawScene() {
  const s = state.scene;
  if (!s) return;
  const out = $('scene-out');
  const c = $('scene-view');
  const ctx = c.getContext('2d');
  const rows = s.rows(), cols = s.cols();
  const hts = s.heights();
  const txz = Number($('txz').value);
  let heat;
  try {
    heat = s.heatmap(state.tx.x, state.tx.y, txz, 1.5);
  } catch (e) {
    showError(out, e);
    return;
  }
  const finite = Array.from(heat).filter(Number.isFinite);
  const lo = Math.min(...finite), hi = Math.max(...finite);
  const cw = c.width / cols, ch = c.height / rows;
  for (let r = 0; r < rows; r++) {
    for (let k = 0; k < cols; k++) {
      const v = heat[r * cols + k];
      const [R, G, B] = Number.isFinite(v) ? colour((v - lo) / (hi - lo || 1)) : [255, 0, 0];
      ctx.fillStyle = `rgb(${R},${G},${B})`;
      ctx.fillRect(k * cw, r * ch, cw + 0.5, ch + 0.5);
      if (hts[r * cols + k] > 0) {
        ctx.fillStyle = 'rgba(60,60,60,0.55)';
        ctx.fillRect(k * cw, r * ch, cw + 0.5, ch + 0.5);
      }
    }
  }
  marker(ctx, state.tx.x, state.tx.y, '#f33', `TX ${txz} m`);
  state.users.forEach((u, i) => marker(ctx, u.x, u.y, '#3c3', `user ${i + 1}`));
  let text = `attenuation ${lo.toFixed(1)} .. ${hi.toFixed(1)} dB (dark = strong); grey cells are buildings`;
  if (state.relay) {
    const [x, y, z, worst, dist, exWorst, exDist] = state.relay;
    ctx.strokeStyle = '#fff';
    ctx.setLineDash([4, 3]);
    for (const u of state.users) {
      ctx.beginPath();
      ctx.moveTo(...toCanvas(u.x, u.y));
      ctx.lineTo(...toCanvas(x, y));
      ctx.stroke();
    }
    ctx.setLineDash([]);
    marker(ctx, x, y, '#fc3', `relay ${z.toFixed(0)} m`);
    text += `\nrelay at (${x.toFixed(1)}, ${y.toFixed(1)}, ${z.toFixed(1)}) m: worst link ${worst.toFixed(2)} dB, searched ${dist.toFixed(0)} m` +
      `\nexhaustive 3D scan: worst link ${exWorst.toFixed(2)} dB, searched ${(exDist / 1000).toFixed(1)} km`;
  } else if (state.users.length < 2) {
    text += `\nselect "click sets users" and pick two outdoor points to place a relay`;
  }
  clearError(out);
  out.textContent = text;
}

function onSceneClick(ev) {
  if (!state.scene) return;
  const rect = ev.target.getBoundingClientRect();
  const p = fromCanvas(ev.clientX - rect.left, ev.clientY - rect.top);
  const mode = document.querySelector('input[name=mode]:checked').value;
  if (mode === 'tx') {
    state.tx = p;
    drawScene();
    return;
  }
  if (state.users.length === 2) state.users = [];
  state.users.push(p);
  state.relay = null;
  drawScene();
  if (state.users.length === 2) {
    const [a, b] = state.users;
    try {
      state.relay = state.scene.relay(a.x, a.y, b.x, b.y, 1.5, 150);
      drawScene();
    } catch (e) {
      showError($('scene-out'), e);
    }
  }
}

await init();
for (const id of ['edges', 'spacing', 'freq', 'theta']) $(id).addEventListener('input', drawSweep);
$('regen').addEventListener('click', newScene);
$('txz').addEventListener('input', () => {
  $('txz-val').textContent = $('txz').value;
  drawScene();
});
$('scene-view').addEventListener('click', onSceneClick);
drawSweep();
newScene();
