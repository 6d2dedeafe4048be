// DOM renderer for the elicitation view: grey total bars over a
// category-by-feature heatmap, a yes/no toggle pair per column, the submit
// control, and an MSE sparkline. Plain DOM, no framework; the whole view is
// torn down and rebuilt on every state change.

import {
  canSubmit,
  colorExtent,
  paintCell,
  type ElicitationView,
  type Toggle,
} from "./model.js";

export interface Handlers {
  onToggle(feature: string, value: Toggle): void;
  onSubmit(): void;
}

const BAR_MAX_PX = 48;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function sparkline(history: number[]): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "sparkline");
  svg.setAttribute("viewBox", "0 0 100 28");
  svg.setAttribute("preserveAspectRatio", "none");
  const lo = Math.min(...history);
  const hi = Math.max(...history);
  const span = hi - lo || 1;
  const step = history.length > 1 ? 100 / (history.length - 1) : 0;
  const points = history
    .map((v, i) => `${(i * step).toFixed(2)},${(26 - (22 * (v - lo)) / span + 1).toFixed(2)}`)
    .join(" ");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#0072b2");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  svg.dataset.points = String(history.length);
  return svg;
}

function toggleCell(feature: string, state: Toggle, handlers: Handlers): HTMLElement {
  const wrap = el("div", "toggle");
  wrap.dataset.feature = feature;
  const yes = el("button", "toggle__btn toggle__btn--yes", "relevant");
  const no = el("button", "toggle__btn toggle__btn--no", "not relevant");
  yes.type = "button";
  no.type = "button";
  yes.setAttribute("aria-pressed", state === 1 ? "true" : "false");
  no.setAttribute("aria-pressed", state === 0 ? "true" : "false");
  if (state === 1) yes.classList.add("toggle__btn--active");
  if (state === 0) no.classList.add("toggle__btn--active");
  yes.addEventListener("click", () => handlers.onToggle(feature, 1));
  no.addEventListener("click", () => handlers.onToggle(feature, 0));
  wrap.append(yes, no);
  return wrap;
}

export function render(container: HTMLElement, view: ElicitationView, handlers: Handlers): void {
  container.textContent = "";
  const root = el("div", "elicit");

  const head = el("header", "elicit__head");
  head.append(
    el("span", "elicit__session", `session ${view.sessionId} (${view.condition})`),
    el(
      "span",
      "elicit__progress",
      view.maxIterations === null
        ? `iteration ${view.iteration}`
        : `iteration ${view.iteration} of ${view.maxIterations}`,
    ),
  );
  root.appendChild(head);

  if (view.error !== null) {
    const banner = el("div", "elicit__error", view.error);
    banner.setAttribute("role", "alert");
    root.appendChild(banner);
  }
  if (view.updating) {
    root.appendChild(el("div", "elicit__updating", "updating…"));
  }

  if (view.terminal) {
    root.appendChild(el("p", "elicit__done", "Session complete."));
  } else if (view.columns.length > 0) {
    root.appendChild(grid(view, handlers));
    const submit = el("button", "elicit__submit", "Submit judgments");
    submit.type = "button";
    submit.disabled = !canSubmit(view);
    submit.addEventListener("click", () => handlers.onSubmit());
    root.appendChild(submit);
  } else {
    root.appendChild(el("p", "elicit__idle", "No query pending."));
  }

  const metrics = el("div", "elicit__metrics");
  const last = view.mseHistory[view.mseHistory.length - 1];
  metrics.appendChild(
    el("span", "elicit__mse", last === undefined ? "no metrics yet" : `MSE ${last.toFixed(4)}`),
  );
  if (view.mseHistory.length > 0) metrics.appendChild(sparkline(view.mseHistory));
  root.appendChild(metrics);

  container.appendChild(root);
}

function grid(view: ElicitationView, handlers: Handlers): HTMLElement {
  const extent = colorExtent(view.columns);
  const maxCount = Math.max(1, ...view.columns.map((c) => c.totalCount));
  const table = el("table", "heatmap");

  // grey total bars sit above the column headers
  const bars = el("tr", "heatmap__bars");
  bars.appendChild(el("th"));
  for (const col of view.columns) {
    const cell = el("th", "heatmap__barcell");
    const bar = el("div", "heatmap__bar");
    bar.style.height = `${Math.round((BAR_MAX_PX * col.totalCount) / maxCount)}px`;
    bar.title = `${col.totalCount} samples`;
    cell.appendChild(bar);
    bars.appendChild(cell);
  }
  table.appendChild(bars);

  const names = el("tr", "heatmap__names");
  names.appendChild(el("th"));
  for (const col of view.columns) {
    names.appendChild(el("th", "heatmap__name", col.feature));
  }
  table.appendChild(names);

  view.rows.forEach((row, i) => {
    const tr = el("tr", "heatmap__row");
    tr.appendChild(el("th", "heatmap__rowname", row));
    for (const col of view.columns) {
      const paint = paintCell(col.cells[i] ?? null, extent);
      const td = el("td", "cell");
      if (paint.kind === "nodata") {
        // deliberately no scale color: "no data" must never look like a mean of 0
        td.classList.add("cell--nodata");
        td.dataset.state = "nodata";
        td.title = "no data";
      } else {
        td.dataset.state = "value";
        td.style.backgroundColor = paint.color;
        td.title = paint.label;
      }
      tr.appendChild(td);
    }
    table.appendChild(tr);
  });

  const toggles = el("tr", "heatmap__toggles");
  toggles.appendChild(el("th", "heatmap__rowname", "relevant?"));
  for (const col of view.columns) {
    const td = el("td", "heatmap__togglecell");
    td.appendChild(toggleCell(col.feature, col.toggle, handlers));
    toggles.appendChild(td);
  }
  table.appendChild(toggles);

  return table;
}
