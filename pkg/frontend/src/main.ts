// Page wiring. All state lives in one slot and every change walks the same
// path: derive from the bundle, replace innerHTML. Nothing renders until a
// bundle parses cleanly, and a failed load leaves the previous view in place
// with only the error banner updated.

import { parseBundle } from "./bundle.js";
import {
  ExplorerState,
  PERF_METRICS,
  PerfMetric,
  histogramCounts,
  initialState,
  metricStats,
  scatterPoints,
  visibleUniverses,
} from "./explore.js";
import { auditPanel } from "./audit.js";
import {
  renderAuditPanel,
  renderError,
  renderFilters,
  renderHistogram,
  renderImportance,
  renderScatter,
  renderSummary,
  renderUniverseTable,
} from "./render.js";

let state: ExplorerState | null = null;
let perfMetric: PerfMetric = "f1";

function byId(id: string): HTMLElement {
  const element = document.getElementById(id);
  if (!element) {
    throw new Error(`missing page element #${id}`);
  }
  return element;
}

function showError(message: string): void {
  const banner = byId("error-banner");
  banner.innerHTML = renderError(message);
  banner.hidden = false;
}

function clearError(): void {
  const banner = byId("error-banner");
  banner.hidden = true;
  banner.innerHTML = "";
}

function redraw(): void {
  if (!state) {
    return;
  }
  const visible = visibleUniverses(state.bundle, state.filters);
  byId("summary").innerHTML = renderSummary(metricStats(visible), state.bundle.universes.length);
  byId("filters").innerHTML = renderFilters(state.bundle.decisions, state.filters);
  byId("histogram").innerHTML = renderHistogram(histogramCounts(visible));
  byId("scatter").innerHTML = renderScatter(scatterPoints(visible, perfMetric), perfMetric);
  byId("universes").innerHTML = renderUniverseTable(
    visible,
    state.bundle.decisions,
    state.selectedId,
  );
  byId("importance").innerHTML = renderImportance(state.bundle.importance);
  const panel =
    state.selectedId !== null ? auditPanel(state.bundle, state.selectedId) : null;
  byId("audit").innerHTML = renderAuditPanel(panel, state.bundle.eval_decisions);
}

function loadText(text: string, source: string): void {
  try {
    const bundle = parseBundle(text);
    state = initialState(bundle);
    clearError();
    byId("load-note").textContent = `${source}: ${bundle.universes.length} universes`;
    redraw();
  } catch (e) {
    showError(e instanceof Error ? e.message : String(e));
  }
}

function wire(): void {
  const fileInput = byId("bundle-file") as HTMLInputElement;
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) {
      return;
    }
    file.text().then(
      (text) => loadText(text, file.name),
      (e) => showError(`could not read file: ${e}`),
    );
  });

  byId("filters").addEventListener("change", (event) => {
    if (!state) {
      return;
    }
    const box = event.target as HTMLInputElement;
    const decision = box.dataset.decision;
    const option = box.dataset.option;
    if (!decision || !option) {
      return;
    }
    const selected = new Set(state.filters[decision] ?? []);
    if (box.checked) {
      selected.add(option);
    } else {
      selected.delete(option);
    }
    state.filters = { ...state.filters, [decision]: [...selected] };
    redraw();
  });

  byId("clear-filters").addEventListener("click", () => {
    if (!state) {
      return;
    }
    state.filters = {};
    redraw();
  });

  const metricSelect = byId("perf-metric") as HTMLSelectElement;
  metricSelect.addEventListener("change", () => {
    const value = metricSelect.value as PerfMetric;
    perfMetric = PERF_METRICS.includes(value) ? value : "f1";
    redraw();
  });

  byId("universes").addEventListener("click", (event) => {
    if (!state) {
      return;
    }
    const row = (event.target as HTMLElement).closest(".u-row") as HTMLElement | null;
    if (!row || !row.dataset.id) {
      return;
    }
    state.selectedId = row.dataset.id;
    redraw();
  });

  // ?bundle=path loads over HTTP when the page is served statically; the
  // file picker covers the file:// case.
  const url = new URLSearchParams(window.location.search).get("bundle");
  if (url) {
    fetch(url)
      .then((response) => {
        if (!response.ok) {
          throw new Error(`fetch failed with status ${response.status}`);
        }
        return response.text();
      })
      .then((text) => loadText(text, url))
      .catch((e) => showError(e instanceof Error ? e.message : String(e)));
  }
}

// Module scripts normally run before DOMContentLoaded, but guard for the
// page being injected into an already parsed document.
if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", wire);
} else {
  wire();
}
