/** Browser bootstrap: wires DOM events to the reducer and re-renders after
 * every server round-trip.  Evaluations re-run on each edit (no optimistic
 * math client-side). */

import { DesignerClient } from "./api.js";
import { canSubmit } from "./expr.js";
import { SessionView, UiEvent, initialView, reduce } from "./state.js";
import {
  renderDraft,
  renderErrorTable,
  renderEvaluationPanel,
  renderRelationList,
  renderWhatIfPanel,
} from "./render.js";

export class DesignerApp {
  view: SessionView = initialView();

  constructor(
    private client: DesignerClient,
    private mount: (html: string) => void,
  ) {}

  dispatch(event: UiEvent): void {
    this.view = reduce(this.view, event);
    this.render();
  }

  render(): void {
    const labels = new Map(this.view.relations.map((r) => [r.root, r.label]));
    const html =
      renderDraft(this.view.draft) +
      renderRelationList(this.view.relations) +
      renderEvaluationPanel(this.view.evaluation) +
      renderWhatIfPanel(this.view.whatIf, this.view.whatIf ? labels.get(this.view.whatIf.root) : undefined) +
      renderErrorTable(this.view.evaluation?.errors ?? [], this.view.evaluation?.error_groups ?? 0, 0) +
      (this.view.lastError ? `<div class="error">${this.view.lastError}</div>` : "");
    this.mount(html);
  }

  async start(): Promise<void> {
    const session = await this.client.createSession();
    this.dispatch({ type: "session-created", sessionId: session.session_id });
    await this.evaluate();
  }

  async evaluate(): Promise<void> {
    if (!this.view.sessionId) return;
    try {
      const response = await this.client.putRules(this.view.sessionId, this.view.system);
      this.dispatch({ type: "evaluation-received", response });
    } catch (err) {
      this.dispatch({ type: "error", message: String(err) });
    }
  }

  async submitRule(): Promise<void> {
    if (!canSubmit(this.view.draft)) {
      this.dispatch({ type: "error", message: "draft is invalid" });
      return;
    }
    this.dispatch({ type: "submit-rule" });
    await this.evaluate();
  }

  async search(query: string): Promise<void> {
    if (!this.view.sessionId) return;
    const result = await this.client.searchRelations(this.view.sessionId, query);
    this.dispatch({ type: "relations-received", relations: result.relations });
  }

  async whatIf(root: number, edge: string): Promise<void> {
    if (!this.view.sessionId) return;
    try {
      const response = await this.client.whatIf(this.view.sessionId, { root, edge });
      this.dispatch({ type: "whatif-received", response, root, edge });
    } catch (err) {
      this.dispatch({ type: "error", message: String(err) });
    }
  }

  async adopt(name: string): Promise<void> {
    this.dispatch({ type: "adopt-whatif", name });
    await this.evaluate();
  }
}

export function boot(baseUrl: string, root: HTMLElement): DesignerApp {
  const app = new DesignerApp(new DesignerClient(baseUrl), (html) => {
    root.innerHTML = html;
  });
  void app.start();
  return app;
}
