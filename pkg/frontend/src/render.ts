/**
 * Pure render functions: state in, HTML string out.
 *
 * Every number displayed here is copied verbatim from a server response
 * field (via `num`, which stringifies the raw JSON value); nothing is
 * recomputed client-side.
 */

import type { EvaluationResponse, ErrorRowJson, RelationItem, WhatIfResponse } from "./api.js";
import { DraftNode, Diagnostic, RuleDraft, validate } from "./expr.js";

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

/** Verbatim JSON number rendering (no rounding, no reformatting). */
export function num(value: number): string {
  return JSON.stringify(value);
}

function accuracy(label: string, a: { hits: number; total: number; value: number }): string {
  return (
    `<div class="metric"><span class="label">${esc(label)}</span>` +
    `<span class="value" data-value="${num(a.value)}">${num(a.value)}</span>` +
    `<span class="counts">${num(a.hits)}/${num(a.total)}</span></div>`
  );
}

export function renderEvaluationPanel(response: EvaluationResponse | null): string {
  if (!response) {
    return `<section id="evaluation" class="empty">No evaluation yet - submit a rule set.</section>`;
  }
  const members = response.axis_member_counts
    .map((axis) => {
      const types = Object.entries(axis.types)
        .map(([t, n]) => `<li>${esc(t)}: ${num(n)}</li>`)
        .join("");
      return `<details><summary>${esc(axis.axis)}</summary><ul>${types}</ul></details>`;
    })
    .join("");
  return (
    `<section id="evaluation" data-version="${num(response.version)}">` +
    accuracy("baseline accuracy", response.s_greedy) +
    accuracy("oracle accuracy", response.s_oracle) +
    accuracy("gold recall", response.gold_recall) +
    `<div class="metric"><span class="label">objective J</span>` +
    `<span class="value" data-value="${num(response.j)}">${num(response.j)}</span></div>` +
    `<div class="metric"><span class="label">axes</span><span class="value">${num(response.axis_count)}</span></div>` +
    `<div class="metric"><span class="label">unlinkable mentions</span><span class="value">${num(response.unlinkable)}</span></div>` +
    `<div class="members">${members}</div>` +
    `</section>`
  );
}

export function renderErrorTable(rows: ErrorRowJson[], totalGroups: number, page: number): string {
  if (totalGroups === 0) {
    return `<section id="errors" class="empty">No disambiguation errors - nothing to explore.</section>`;
  }
  const body = rows
    .map((row, i) => {
      const confusions = row.top_confusions
        .map((c) => `${esc(c.label ?? String(c.entity))} (&#215;${num(c.count)})`)
        .join(", ");
      return (
        `<tr data-row="${i}"><td>${row.gold_types.map(esc).join(" | ")}</td>` +
        `<td>${num(row.mentions)}</td><td>${num(row.errors)}</td>` +
        `<td class="confusions">${confusions}</td></tr>`
      );
    })
    .join("");
  return (
    `<section id="errors"><table><thead>` +
    `<tr><th>gold types</th><th>mentions</th><th>errors</th><th>top confusions</th></tr>` +
    `</thead><tbody>${body}</tbody></table>` +
    `<nav class="paging" data-page="${num(page)}" data-total-groups="${num(totalGroups)}">` +
    `<button data-action="prev-page">&#8592;</button>` +
    `<span>page ${num(page)}</span>` +
    `<button data-action="next-page">&#8594;</button></nav></section>`
  );
}

export function renderWhatIfPanel(
  whatIf: (WhatIfResponse & { root: number; edge: string }) | null,
  rootLabel?: string,
): string {
  if (!whatIf) {
    return `<section id="whatif" class="empty">Pick a relation to preview its effect.</section>`;
  }
  const title = rootLabel ? `${rootLabel} via ${whatIf.edge}` : `${whatIf.edge}(${whatIf.root})`;
  return (
    `<section id="whatif" data-root="${num(whatIf.root)}" data-edge="${esc(whatIf.edge)}">` +
    `<h3>${esc(title)}</h3>` +
    `<div class="metric"><span class="label">&#916; oracle accuracy</span>` +
    `<span class="value" data-value="${num(whatIf.delta_s_oracle)}">${num(whatIf.delta_s_oracle)}</span></div>` +
    `<div class="metric"><span class="label">&#916; J</span>` +
    `<span class="value" data-value="${num(whatIf.delta_j)}">${num(whatIf.delta_j)}</span></div>` +
    `<div class="metric"><span class="label">learnability estimate</span>` +
    `<span class="value">${num(whatIf.learnability_estimate)}</span></div>` +
    `<div class="metric"><span class="label">members</span><span class="value">${num(whatIf.members)}</span></div>` +
    `<button data-action="adopt-axis">adopt axis</button>` +
    `</section>`
  );
}

export function renderRelationList(relations: RelationItem[]): string {
  const rows = relations
    .map(
      (r) =>
        `<li data-root="${num(r.root)}" data-edge="${esc(r.edge)}">` +
        `<button data-action="pick-relation">${esc(r.label)} <small>${esc(r.edge)}, ${num(r.members)} members</small></button></li>`,
    )
    .join("");
  return `<ul id="relations">${rows}</ul>`;
}

export function renderDraft(draft: RuleDraft): string {
  const diagnostics = validate(draft);
  const byPath = new Map(diagnostics.map((d) => [d.path.join("."), d.message]));
  const node = (n: DraftNode | null, path: number[]): string => {
    const key = path.join(".");
    const problem = byPath.has(key) ? ` class="invalid" title="${esc(byPath.get(key)!)}"` : "";
    if (!n) return `<span class="hole" data-path="${key}">&#9633;</span>`;
    if (n.kind === "rel") {
      const text = n.root === null || !n.edge ? "(pick relation)" : `${n.edge}(${n.root})`;
      return `<span data-path="${key}"${problem}>${esc(text)}</span>`;
    }
    if (n.kind === "not") {
      return `<span data-path="${key}"${problem}>not(${node(n.child, [...path, 0])})</span>`;
    }
    const parts = n.children.map((c, i) => node(c, [...path, i]));
    parts.push(`<span class="hole" data-path="${[...path, n.children.length].join(".")}">+</span>`);
    return `<span data-path="${key}"${problem}>${n.kind}(${parts.join(", ")})</span>`;
  };
  const submittable = diagnostics.length === 0;
  return (
    `<section id="draft" data-dirty="${draft.dirty}">` +
    `<input id="type-name" value="${esc(draft.typeName)}" placeholder="type name">` +
    `<div class="tree">${node(draft.expr, [])}</div>` +
    `<button data-action="submit-rule" ${submittable ? "" : "disabled"}>add rule</button>` +
    (submittable
      ? ""
      : `<ul class="diagnostics">${diagnostics
          .map((d) => `<li data-path="${d.path.join(".")}">${esc(d.message)}</li>`)
          .join("")}</ul>`) +
    `</section>`
  );
}
