/**
 * Session view state and its reducer.
 *
 * Every UI interaction is an event; the state is a pure fold over the event
 * log, so replaying a recorded log reproduces the exact final rule set.  The
 * UI computes no accuracy numbers itself: evaluation fields only ever enter
 * the state through server responses, and responses carrying a version
 * older than the latest applied one are dropped.
 */

import type { EvaluationResponse, RelationItem, SystemJson, WhatIfResponse } from "./api.js";
import {
  DraftNode,
  Path,
  RuleDraft,
  deleteNode,
  emptyDraft,
  opNode,
  relNode,
  serialize,
  setNode,
  canSubmit,
} from "./expr.js";

export interface SessionView {
  sessionId: string | null;
  axisName: string;
  system: SystemJson;
  draft: RuleDraft;
  evaluation: EvaluationResponse | null;
  whatIf: (WhatIfResponse & { root: number; edge: string }) | null;
  relations: RelationItem[];
  appliedVersion: number;
  lastError: string | null;
}

export function initialView(): SessionView {
  return {
    sessionId: null,
    axisName: "IsA",
    system: { axes: [] },
    draft: emptyDraft(),
    evaluation: null,
    whatIf: null,
    relations: [],
    appliedVersion: -1,
    lastError: null,
  };
}

export type UiEvent =
  | { type: "session-created"; sessionId: string }
  | { type: "set-axis-name"; name: string }
  | { type: "set-type-name"; name: string }
  | { type: "place-node"; path: Path; node: "and" | "or" | "not" }
  | { type: "place-relation"; path: Path; root: number; edge: string }
  | { type: "delete-node"; path: Path }
  | { type: "submit-rule" }
  | { type: "adopt-whatif"; name: string }
  | { type: "undo-axis"; name: string }
  | { type: "evaluation-received"; response: EvaluationResponse }
  | { type: "whatif-received"; response: WhatIfResponse; root: number; edge: string }
  | { type: "relations-received"; relations: RelationItem[] }
  | { type: "error"; message: string };

/** Add (or replace) a rule on the named authored axis of a system. */
function withRule(system: SystemJson, axisName: string, typeName: string, expr: ReturnType<typeof serialize>): SystemJson {
  const axes = system.axes.map((axis) => ({
    ...axis,
    rules: axis.rules ? axis.rules.map((r) => ({ ...r })) : undefined,
  }));
  let axis = axes.find((a) => a.name === axisName);
  if (!axis) {
    axis = { name: axisName, kind: "authored", rules: [] };
    axes.push(axis);
  }
  if (axis.kind !== "authored") throw new Error(`axis ${axisName} is not authored`);
  axis.rules = axis.rules ?? [];
  const existing = axis.rules.findIndex((r) => r.type === typeName);
  if (existing >= 0) axis.rules[existing] = { type: typeName, expr };
  else axis.rules.push({ type: typeName, expr });
  return { axes };
}

export function reduce(view: SessionView, event: UiEvent): SessionView {
  switch (event.type) {
    case "session-created":
      return { ...initialView(), sessionId: event.sessionId };
    case "set-axis-name":
      return { ...view, axisName: event.name };
    case "set-type-name":
      return { ...view, draft: { ...view.draft, typeName: event.name, dirty: true } };
    case "place-node":
      return { ...view, draft: setNode(view.draft, event.path, opNode(event.node)), lastError: null };
    case "place-relation":
      return {
        ...view,
        draft: setNode(view.draft, event.path, relNode(event.root, event.edge)),
        lastError: null,
      };
    case "delete-node":
      return { ...view, draft: deleteNode(view.draft, event.path), lastError: null };
    case "submit-rule": {
      if (!canSubmit(view.draft)) {
        return { ...view, lastError: "draft is invalid; fix the highlighted nodes" };
      }
      const system = withRule(view.system, view.axisName, view.draft.typeName.trim(), serialize(view.draft));
      return { ...view, system, draft: emptyDraft(), lastError: null };
    }
    case "adopt-whatif": {
      if (!view.whatIf) return view;
      const axes = view.system.axes.concat([
        {
          name: event.name,
          kind: "discovered",
          relation: { root: view.whatIf.root, edge: view.whatIf.edge },
        },
      ]);
      return { ...view, system: { axes }, whatIf: null };
    }
    case "undo-axis":
      return { ...view, system: { axes: view.system.axes.filter((a) => a.name !== event.name) } };
    case "evaluation-received": {
      if (event.response.version < view.appliedVersion) {
        return view; // stale response from an older rule set
      }
      return { ...view, evaluation: event.response, appliedVersion: event.response.version, lastError: null };
    }
    case "whatif-received":
      return { ...view, whatIf: { ...event.response, root: event.root, edge: event.edge } };
    case "relations-received":
      return { ...view, relations: event.relations };
    case "error":
      return { ...view, lastError: event.message };
  }
}

export function replay(events: UiEvent[], start: SessionView = initialView()): SessionView {
  return events.reduce(reduce, start);
}

export function serializedSystem(view: SessionView): string {
  return JSON.stringify(view.system);
}
