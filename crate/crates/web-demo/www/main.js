import init, { zoom_preview, feature_map, train_blobs } from "./pkg/histograde_web_demo.js";

const MAX_SIDE = 224;
const $ = (id) => document.getElementById(id);
let image = null;

function report(err) {
  $("error").textContent = err ? String(err) : "";
}

function draw(canvas, rgba, width, height) {
  canvas.width = width;
  canvas.height = height;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), width, height), 0, 0);
}

async function load(file) {
  const bitmap = await createImageBitmap(file);
  const scale = Math.min(1, MAX_SIDE / Math.max(bitmap.width, bitmap.height));
  const width = Math.max(2, Math.round(bitmap.width * scale));
  const height = Math.max(2, Math.round(bitmap.height * scale));
  const canvas = $("source");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  ctx.drawImage(bitmap, 0, 0, width, height);
  image = { rgba: new Uint8Array(ctx.getImageData(0, 0, width, height).data), width, height };
}

function syntheticImage() {
  const width = 160, height = 120;
  const rgba = new Uint8Array(width * height * 4);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const d = Math.hypot(x - 60, y - 50) < 30 || Math.hypot(x - 115, y - 80) < 22;
      rgba.set(d ? [90, 40, 150, 255] : [225, 170, 200, 255], i);
    }
  }
  draw($("source"), rgba, width, height);
  image = { rgba, width, height };
}

function runZoom() {
  const zoom = Number($("zoom").value);
  const seed = Number($("zoom-seed").value) >>> 0;
  draw($("zoomed"), zoom_preview(image.rgba, image.width, image.height, zoom, seed), image.width, image.height);
}

function runFeatures() {
  const out = feature_map(image.rgba, image.width, image.height, $("kernel").value);
  const w = image.width >> 1, h = image.height >> 1;
  draw($("features"), out, w, h);
  const c = $("features");
  c.style.width = `${w * 2}px`;
  c.style.height = `${h * 2}px`;
}

function runTraining() {
  const curve = train_blobs(
    Number($("separation").value),
    Number($("noise").value),
    Number($("epochs").value) >>> 0,
    Number($("threshold").value),
    Number($("train-seed").value) >>> 0,
  );
  const n = curve.length / 2;
  const loss = [], acc = [];
  for (let i = 0; i < n; i++) {
    loss.push(curve[2 * i]);
    acc.push(curve[2 * i + 1]);
  }
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const maxLoss = Math.max(...loss, 1e-9);
  const plot = (values, top, colour) => {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    values.forEach((v, i) => {
      const x = 20 + (i / Math.max(1, n - 1)) * (canvas.width - 40);
      const y = canvas.height - 20 - (v / top) * (canvas.height - 40);
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  };
  plot(loss, maxLoss, "#c33");
  plot(acc, 1, "#36c");
  $("train-summary").textContent =
    `${n} epochs; final train loss ${loss[n - 1].toFixed(4)} (red), validation accuracy ${acc[n - 1].toFixed(3)} (blue)`;
}

function guarded(fn) {
  return () => {
    try {
      report(null);
      fn();
    } catch (err) {
      report(err);
    }
  };
}

await init();
syntheticImage();
$("file").addEventListener("change", async (e) => {
  if (e.target.files.length) {
    await load(e.target.files[0]);
    guarded(runZoom)();
  }
});
$("zoom").addEventListener("input", () => ($("zoom-value").textContent = $("zoom").value));
$("zoom-run").addEventListener("click", guarded(runZoom));
$("feature-run").addEventListener("click", guarded(runFeatures));
$("train-run").addEventListener("click", guarded(runTraining));
guarded(runZoom)();
