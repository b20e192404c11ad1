// HTML renderers. Every function is a pure string builder over already
// derived data, so all views can be exercised in tests without a DOM. The
// page shell assigns the results to innerHTML.

import { DecisionSpec, ImportanceEntry, Universe } from "./bundle.js";
import { Filters, MetricStats, PerfMetric, ScatterPoint } from "./explore.js";
import { AuditPanel, formatDelta } from "./audit.js";

// Keeps table views responsive on full grids; the counts shown elsewhere
// always cover the whole visible set.
export const TABLE_ROW_CAP = 200;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(value: number | null, digits = 3): string {
  return value === null ? "" : value.toFixed(digits);
}

export function renderError(message: string): string {
  return `<div class="banner" role="alert">${escapeHtml(message)}</div>`;
}

export function renderSummary(stats: MetricStats, total: number): string {
  const parts = [
    `<span class="stat" data-visible="${stats.visible}"><b>${stats.visible}</b> of ${total} universes</span>`,
    `<span class="stat"><b>${stats.ok}</b> with a defined metric</span>`,
  ];
  if (stats.errored > 0) {
    parts.push(`<span class="stat warn"><b>${stats.errored}</b> undefined</span>`);
  }
  if (stats.min !== null && stats.mean !== null && stats.max !== null) {
    parts.push(
      `<span class="stat">eq odds diff ${fmt(stats.min)} / ${fmt(stats.mean)} / ${fmt(stats.max)} (min / mean / max)</span>`,
    );
  }
  return parts.join("\n");
}

export function renderImportance(entries: ImportanceEntry[]): string {
  if (entries.length === 0) {
    return `<p class="empty">no importance table in this bundle</p>`;
  }
  const rows = entries
    .map((entry) => {
      const label = entry.subset.map(escapeHtml).join(" + ");
      const width = Math.max(0, Math.min(1, entry.importance)) * 100;
      return (
        `<tr data-subset="${escapeHtml(entry.subset.join("+"))}">` +
        `<td>${label}</td><td class="num">${entry.importance.toFixed(3)}</td>` +
        `<td class="gauge"><div style="width:${width.toFixed(1)}%"></div></td></tr>`
      );
    })
    .join("");
  return (
    `<table class="importance" data-entries="${entries.length}">` +
    `<thead><tr><th>decisions</th><th class="num">importance</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderFilters(decisions: DecisionSpec[], filters: Filters): string {
  return decisions
    .map((spec) => {
      const selected = filters[spec.name] ?? [];
      const boxes = spec.options
        .map((option) => {
          const checked = selected.includes(option) ? " checked" : "";
          return (
            `<label><input type="checkbox" data-decision="${escapeHtml(spec.name)}" ` +
            `data-option="${escapeHtml(option)}"${checked}> ${escapeHtml(option)}</label>`
          );
        })
        .join("\n");
      return `<fieldset><legend>${escapeHtml(spec.name)}</legend>\n${boxes}\n</fieldset>`;
    })
    .join("\n");
}

export function renderHistogram(counts: number[]): string {
  const total = counts.reduce((s, c) => s + c, 0);
  if (total === 0) {
    return `<p class="empty">no defined metric values in the current view</p>`;
  }
  const max = Math.max(...counts);
  const width = 100 / counts.length;
  const bars = counts
    .map((count, i) => {
      const lo = (i / counts.length).toFixed(2);
      const hi = ((i + 1) / counts.length).toFixed(2);
      const height = ((100 * count) / max).toFixed(1);
      return (
        `<div class="bar" data-count="${count}" title="[${lo}, ${hi}): ${count}" ` +
        `style="width:${width.toFixed(2)}%;height:${height}%"></div>`
      );
    })
    .join("");
  return `<div class="bars" data-total="${total}">${bars}</div>`;
}

export function renderScatter(points: ScatterPoint[], metric: PerfMetric): string {
  if (points.length === 0) {
    return `<p class="empty">nothing to plot in the current view</p>`;
  }
  const circles = points
    .map((p) => {
      const cx = (p.fairness * 100).toFixed(2);
      const cy = (100 - p.performance * 100).toFixed(2);
      return (
        `<circle cx="${cx}" cy="${cy}" r="1.6" data-id="${escapeHtml(p.id)}">` +
        `<title>${escapeHtml(p.id)}: ${p.fairness.toFixed(3)}, ${p.performance.toFixed(3)}</title></circle>`
      );
    })
    .join("");
  return (
    `<svg viewBox="-2 -2 104 104" preserveAspectRatio="none" data-points="${points.length}">` +
    `<rect class="frame" x="0" y="0" width="100" height="100"/>${circles}</svg>` +
    `<div class="axes"><span>eq odds diff &rarr;</span><span>&uarr; ${escapeHtml(metric)}</span></div>`
  );
}

export function renderUniverseTable(
  universes: Universe[],
  decisions: DecisionSpec[],
  selectedId: string | null,
): string {
  if (universes.length === 0) {
    return `<p class="empty">no universes match the current filters</p>`;
  }
  const names = decisions.map((d) => d.name);
  const header =
    `<tr><th>id</th>` +
    names.map((n) => `<th>${escapeHtml(n)}</th>`).join("") +
    `<th class="num">eq odds diff</th><th class="num">f1</th><th>status</th></tr>`;
  const shown = universes.slice(0, TABLE_ROW_CAP);
  const rows = shown
    .map((u) => {
      const classes = u.id === selectedId ? "u-row selected" : "u-row";
      const cells = names.map((n) => `<td>${escapeHtml(u.options[n] ?? "")}</td>`).join("");
      return (
        `<tr class="${classes}" data-id="${escapeHtml(u.id)}"><td class="id">${escapeHtml(u.id)}</td>` +
        cells +
        `<td class="num">${fmt(u.metrics.eq_odds_diff)}</td>` +
        `<td class="num">${fmt(u.metrics.f1)}</td>` +
        `<td>${escapeHtml(u.metrics.status)}</td></tr>`
      );
    })
    .join("");
  const note =
    universes.length > shown.length
      ? `<p class="note">showing the first ${shown.length} of ${universes.length} universes</p>`
      : "";
  return (
    `<table class="universes" data-visible="${universes.length}">` +
    `<thead>${header}</thead><tbody>${rows}</tbody></table>${note}`
  );
}

export function renderAuditPanel(panel: AuditPanel | null, evalDecisions: DecisionSpec[]): string {
  if (panel === null) {
    return `<p class="empty">select a universe row to audit its evaluation strategies</p>`;
  }
  const u = panel.universe;
  const optionLine = Object.entries(u.options)
    .map(([k, v]) => `${escapeHtml(k)}=${escapeHtml(v)}`)
    .join(", ");

  const badges = [
    `<span class="chip" data-rows="${panel.rows.length}">${panel.rows.length} strategies</span>`,
    `<span class="chip">&Delta; ${formatDelta(panel.delta)}</span>`,
    panel.reference !== null
      ? `<span class="chip reference" data-value="${panel.reference}">reference ${fmt(panel.reference)}</span>`
      : `<span class="chip warn">no reference reading</span>`,
  ];
  if (panel.undefinedCount > 0) {
    badges.push(`<span class="chip warn">${panel.undefinedCount} undefined</span>`);
  }

  // Distribution strip: one tick per defined reading, the reference marked.
  const ticks = panel.rows
    .filter((r) => r.value !== null)
    .map((r) => {
      const left = ((r.value as number) * 100).toFixed(2);
      const cls = r.isReference ? "tick reference" : "tick";
      return `<div class="${cls}" style="left:${left}%" title="${fmt(r.value)}"></div>`;
    })
    .join("");
  const strip = `<div class="strip" data-defined="${panel.defined}">${ticks}</div>`;

  const breakdown = panel.breakdown
    .map((d) => {
      const rows = d.options
        .map(
          (o) =>
            `<tr><td>${escapeHtml(o.option)}</td><td class="num">${o.count}</td>` +
            `<td class="num">${fmt(o.mean)}</td></tr>`,
        )
        .join("");
      return (
        `<table class="breakdown"><thead><tr><th>${escapeHtml(d.decision)}</th>` +
        `<th class="num">n</th><th class="num">mean</th></tr></thead><tbody>${rows}</tbody></table>`
      );
    })
    .join("\n");

  const header =
    `<tr>` +
    evalDecisions.map((d) => `<th>${escapeHtml(d.name)}</th>`).join("") +
    `<th class="num">eq odds diff</th><th>status</th></tr>`;
  const rows = panel.rows
    .map((r) => {
      const cells = evalDecisions
        .map((d) => `<td>${escapeHtml(r.strategy[d.name] ?? "")}</td>`)
        .join("");
      const cls = r.isReference ? "s-row reference" : "s-row";
      return (
        `<tr class="${cls}" data-status="${escapeHtml(r.status)}">${cells}` +
        `<td class="num">${fmt(r.value)}</td><td>${escapeHtml(r.status)}</td></tr>`
      );
    })
    .join("");

  return (
    `<h3>universe <code>${escapeHtml(u.id)}</code></h3>` +
    `<p class="options">${optionLine}</p>` +
    `<p class="chips">${badges.join(" ")}</p>` +
    strip +
    `<div class="breakdowns">${breakdown}</div>` +
    `<table class="strategies" data-rows="${panel.rows.length}">` +
    `<thead>${header}</thead><tbody>${rows}</tbody></table>`
  );
}
