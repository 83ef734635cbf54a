/** Typed client for the designer service. The fetch implementation is
 * injectable so contract tests can replay recorded fixtures. */

import type { ExprJson } from "./expr.js";

export interface AccuracyJson {
  hits: number;
  total: number;
  value: number;
}

export interface AxisJson {
  name: string;
  kind: "discovered" | "authored";
  relation?: { root: number; edge: string };
  rules?: { type: string; expr: ExprJson }[];
}

export interface SystemJson {
  axes: AxisJson[];
}

export interface ErrorRowJson {
  gold_types: string[];
  mentions: number;
  errors: number;
  top_confusions: { entity: number; count: number; label?: string }[];
}

export interface EvaluationResponse {
  version: number;
  s_greedy: AccuracyJson;
  s_oracle: AccuracyJson;
  j: number;
  lambda: number;
  axis_count: number;
  gold_recall: AccuracyJson;
  unlinkable: number;
  axis_member_counts: { axis: string; types: Record<string, number> }[];
  error_groups: number;
  errors: ErrorRowJson[];
  timing_ms: number;
}

export interface WhatIfResponse {
  version: number;
  delta_s_oracle: number;
  delta_j: number;
  learnability_estimate: number;
  members: number;
  timing_ms: number;
}

export interface RelationItem {
  root: number;
  label: string;
  edge: string;
  children: number;
  members: number;
}

export interface ErrorPage {
  version: number;
  total_groups: number;
  page: number;
  page_size: number;
  rows: ErrorRowJson[];
}

export interface ServiceError {
  error: { code: string; message: string; path: string | null };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ServiceError["error"],
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DesignerClient {
  constructor(
    private base: string,
    private fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, (payload as ServiceError).error);
    }
    return payload as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/health");
  }

  createSession(world?: { graph: string; links: string; corpus: string }): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", world ?? {});
  }

  putRules(sessionId: string, system: SystemJson): Promise<EvaluationResponse> {
    return this.request("PUT", `/sessions/${sessionId}/rules`, system);
  }

  whatIf(sessionId: string, relation: { root: number; edge: string }): Promise<WhatIfResponse> {
    return this.request("POST", `/sessions/${sessionId}/whatif`, relation);
  }

  searchRelations(sessionId: string, query: string, limit = 50): Promise<{ relations: RelationItem[]; total: number }> {
    const q = encodeURIComponent(query);
    return this.request("GET", `/sessions/${sessionId}/relations?query=${q}&limit=${limit}`);
  }

  errorPage(sessionId: string, page: number, pageSize: number, group = ""): Promise<ErrorPage> {
    const g = encodeURIComponent(group);
    return this.request("GET", `/sessions/${sessionId}/errors?group=${g}&page=${page}&page_size=${pageSize}`);
  }
}
