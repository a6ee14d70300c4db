import init, { hit_ratio_curves, ttl_curves, knapsack_bounds } from "./pkg/cachelab_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#111111", "#8c564b"];
const SVG = "http://www.w3.org/2000/svg";

function el(name, attrs = {}, text) {
  const node = document.createElementNS(SVG, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatTick(v) {
  if (v >= 1e4 || (v > 0 && v < 1e-2)) return v.toExponential(0);
  return String(Math.round(v * 1000) / 1000);
}

// Line chart with a logarithmic x axis and a linear y axis.
function plot(container, curves, { xLabel, yLabel, yMax }) {
  const W = 900, H = 380, L = 60, R = 20, T = 15, B = 45;
  const xs = curves.x.map(Math.log10);
  const x0 = Math.min(...xs), x1 = Math.max(...xs) === x0 ? x0 + 1 : Math.max(...xs);
  const all = curves.series.flatMap(s => s.values).filter(Number.isFinite);
  const top = yMax ?? Math.max(...all, 1e-9) * 1.05;
  const sx = v => L + (W - L - R) * (v - x0) / (x1 - x0);
  const sy = v => H - B - (H - T - B) * v / top;

  const svg = el("svg", { viewBox: `0 0 ${W} ${H}` });
  for (let d = Math.ceil(x0); d <= Math.floor(x1); d++) {
    svg.append(el("line", { x1: sx(d), x2: sx(d), y1: T, y2: H - B, stroke: "#eee" }));
    svg.append(el("text", { x: sx(d), y: H - B + 16, "text-anchor": "middle" }, formatTick(10 ** d)));
  }
  for (let i = 0; i <= 5; i++) {
    const v = top * i / 5;
    svg.append(el("line", { x1: L, x2: W - R, y1: sy(v), y2: sy(v), stroke: "#eee" }));
    svg.append(el("text", { x: L - 6, y: sy(v) + 4, "text-anchor": "end" }, formatTick(v)));
  }
  svg.append(el("text", { x: (L + W - R) / 2, y: H - 8, "text-anchor": "middle" }, xLabel));
  svg.append(el("text", { x: 14, y: (T + H - B) / 2, transform: `rotate(-90 14 ${(T + H - B) / 2})`, "text-anchor": "middle" }, yLabel));

  const legend = document.createElement("div");
  legend.className = "legend";
  curves.series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const points = s.values.map((v, j) => `${sx(xs[j])},${sy(v)}`).join(" ");
    const dashed = /bound|Che/.test(s.name);
    svg.append(el("polyline", {
      points, fill: "none", stroke: color, "stroke-width": 2,
      "stroke-dasharray": dashed ? "6 4" : "none",
    }));
    const item = document.createElement("span");
    item.style.setProperty("--c", color);
    item.textContent = s.name;
    legend.append(item);
  });
  container.replaceChildren(svg, legend);
}

function wire(formId, compute) {
  const form = document.getElementById(formId);
  const section = form.closest("section");
  const status = section.querySelector(".status");
  const plots = section.querySelectorAll(".plot");
  const run = () => {
    const values = Object.fromEntries([...new FormData(form)].map(([k, v]) => [k, Number(v)]));
    status.className = "status";
    status.textContent = "computing...";
    // yield once so the status text is painted before the blocking call
    setTimeout(() => {
      const started = performance.now();
      try {
        compute(values, plots);
        status.textContent = `done in ${((performance.now() - started) / 1000).toFixed(2)} s`;
      } catch (err) {
        status.className = "status error";
        status.textContent = String(err.message ?? err);
      }
    }, 20);
  };
  form.addEventListener("submit", e => { e.preventDefault(); run(); });
  run();
}

await init();

wire("hrc", (v, [out]) => {
  const curves = JSON.parse(hit_ratio_curves(v.objects, v.beta, v.requests, v.points, v.seed));
  plot(out, curves, { xLabel: "cache size (objects)", yLabel: "object hit ratio", yMax: 1 });
});

wire("ttl", (v, [hits, occupancy]) => {
  const curves = JSON.parse(ttl_curves(v.objects, v.beta, v.rate, v.maxTtl, v.points));
  plot(hits, curves.hit_ratio, { xLabel: "TTL (s)", yLabel: "hit ratio", yMax: 1 });
  plot(occupancy, curves.occupancy, { xLabel: "TTL (s)", yLabel: "valid objects in cache" });
});

wire("bounds", (v, [out]) => {
  const curves = JSON.parse(knapsack_bounds(v.objects, v.beta, v.requests, v.sigma, v.points, v.seed));
  plot(out, curves, { xLabel: "cache size (bytes)", yLabel: "object hit ratio", yMax: 1 });
});
