/** DOM rendering + event wiring for the App view model. */

import { dataTableRows, renderChart } from "./renderer.js";
import { App, ViewState } from "./state.js";
import type { MarkKind } from "./types.js";

function esc(s: unknown): string {
  return String(s).replace(/&/g, "&amp;").replace(/</g, "&lt;")
    .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function fieldList(state: ViewState): string {
  if (!state.dataset) return "";
  const rows = state.dataset.columns.map((c) =>
    `<li><span class="field-name">${esc(c.name)}</span>` +
    `<span class="field-type ${c.semantic_type}">${c.semantic_type}</span></li>`);
  return `<h2>${esc(state.dataset.name)} <small>${state.dataset.row_count} rows</small></h2>` +
    `<ul class="fields">${rows.join("")}</ul>`;
}

function scoreBar(value: number): string {
  const pct = Math.round(value * 100);
  return `<span class="scorebar"><span class="scorebar-fill" style="width:${pct}%"></span></span>`;
}

function gallery(app: App): string {
  const state = app.state;
  const cards = state.charts.map((chart, i) => {
    const switches = (["bar", "line", "pie", "scatter"] as MarkKind[])
      .filter((m) => m !== chart.spec.mark)
      .map((m) => {
        const blocked = app.switchTooltip(i, m);
        return blocked
          ? `<button class="switch" disabled title="${esc(blocked)}">${m}</button>`
          : `<button class="switch" data-switch="${i}:${m}">${m}</button>`;
      }).join("");
    return `<article class="card" data-chart="${i}">
      <header><span class="rank">#${chart.rank}</span>
        <code class="query">${esc(chart.query)}</code>
        <span class="crf" title="composite reward">${chart.crf.toFixed(3)}</span></header>
      ${renderChart(chart.spec)}
      <footer>
        <button data-zoom="${i}">zoom</button>
        <button data-viewdata="${i}">view data</button>
        <button data-keep="${i}">keep</button>
        <span class="switches">as: ${switches}</span>
      </footer>
    </article>`;
  });
  return `<div class="gallery">${cards.join("")}</div>`;
}

function hintChips(state: ViewState): string {
  if (!state.round) return "";
  const chips = state.round.hints.map((h) =>
    `<button class="chip" data-hint="${esc(h.id)}" ${state.pending ? "disabled" : ""}
       title="cost ${h.cost} charts">${esc(h.text)} ${scoreBar(h.avg_score)}</button>`);
  return `<div class="hints"><h3>Explore next</h3>${chips.join("")}</div>`;
}

function timeline(state: ViewState): string {
  if (!state.round) return "";
  const past = state.history.map((r) =>
    `<button class="round past" data-history="${r.round}">round ${r.round}</button>`);
  return `<nav class="timeline">${past.join("")}` +
    `<span class="round current">round ${state.round.round}</span></nav>`;
}

function historyModal(app: App): string {
  const n = app.state.historyView;
  if (n === null) return "";
  const past = app.historyRound(n);
  if (!past) return "";
  const cards = past.recommendations.map((rec) =>
    `<article class="card readonly">
      <header><span class="rank">#${rec.rank}</span>
        <code class="query">${esc(rec.query)}</code>
        <span class="crf">${rec.score.crf.toFixed(3)}</span></header>
      ${renderChart(rec.spec)}
    </article>`);
  return `<div class="modal" data-close><div class="modal-body history">
    <h3>round ${n} (read-only)</h3>
    <div class="gallery">${cards.join("")}</div></div></div>`;
}

function modal(state: ViewState): string {
  if (state.zoomedChart !== null) {
    const chart = state.charts[state.zoomedChart];
    if (chart) {
      return `<div class="modal" data-close><div class="modal-body zoom">
        ${renderChart(chart.spec)}<code>${esc(chart.query)}</code></div></div>`;
    }
  }
  if (state.dataViewChart !== null) {
    const chart = state.charts[state.dataViewChart];
    if (chart) {
      const rows = dataTableRows(chart.spec).map(([x, y, c]) =>
        `<tr><td>${esc(x)}</td><td>${esc(y)}</td><td>${esc(c)}</td></tr>`).join("");
      return `<div class="modal" data-close><div class="modal-body">
        <table class="data-table"><thead><tr><th>x</th><th>y</th><th>series</th></tr></thead>
        <tbody>${rows}</tbody></table></div></div>`;
    }
  }
  return "";
}

export function renderApp(app: App): string {
  const state = app.state;
  const banner = state.error
    ? `<div class="banner" data-dismiss>${esc(state.error)} (click to dismiss)</div>` : "";
  const busy = state.pending ? `<div class="spinner">working…</div>` : "";
  if (!state.round) {
    return `${banner}${busy}<section class="upload">
      <h1>vizscout</h1>
      <p>Upload a CSV to get ranked charts and exploration hints.</p>
      <input type="file" id="file" accept=".csv,text/csv" ${state.pending ? "disabled" : ""}/>
    </section>`;
  }
  return `${banner}${busy}
    <aside class="sidebar">${fieldList(state)}${timeline(state)}
      <div class="kept"><h3>Kept</h3><ul>${
        state.keptUnion.map((q) => `<li><code>${esc(q)}</code></li>`).join("")
      }</ul></div></aside>
    <main>${hintChips(state)}${gallery(app)}</main>
    ${historyModal(app)}${modal(state)}`;
}

export function mount(root: HTMLElement, app: App): void {
  app.subscribe(() => {
    root.innerHTML = renderApp(app);
  });

  root.addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.id === "file" && input.files && input.files[0]) {
      const file = input.files[0];
      file.text().then((text) => app.uploadAndStart(file.name, text));
    }
  });

  root.addEventListener("click", (ev) => {
    const el = (ev.target as HTMLElement).closest("[data-hint],[data-zoom]," +
      "[data-viewdata],[data-keep],[data-switch],[data-close],[data-dismiss]," +
      "[data-history]");
    if (!el) return;
    const d = (el as HTMLElement).dataset;
    if (d.hint !== undefined) void app.selectHint(d.hint);
    else if (d.zoom !== undefined) app.zoomChart(Number(d.zoom));
    else if (d.viewdata !== undefined) app.viewData(Number(d.viewdata));
    else if (d.keep !== undefined) {
      const chart = app.state.charts[Number(d.keep)];
      if (chart) void app.keepCharts([chart.query]);
    } else if (d.switch !== undefined) {
      const [idx, mark] = d.switch.split(":");
      app.switchMark(Number(idx), mark as MarkKind);
    } else if (d.history !== undefined) {
      app.showHistory(Number(d.history));
    } else if (d.close !== undefined) {
      app.zoomChart(null);
      app.viewData(null);
      app.showHistory(null);
    } else if (d.dismiss !== undefined) {
      app.state.error = null;
      root.innerHTML = renderApp(app);
    }
  });

  root.innerHTML = renderApp(app);
}
