/**
 * Rule drafts: an editable Boolean expression tree that serialises to the
 * server's expression JSON once every hole is filled.
 *
 * Draft nodes may be incomplete while the user composes them; `validate`
 * reports node-level diagnostics and `serialize` refuses invalid drafts, so
 * the submit button can stay disabled instead of sending garbage.
 */

export type ExprJson =
  | { op: "rel"; root: number; edge: string }
  | { op: "not"; arg: ExprJson }
  | { op: "and" | "or"; args: ExprJson[] };

export type DraftNode =
  | { kind: "rel"; root: number | null; edge: string | null }
  | { kind: "not"; child: DraftNode | null }
  | { kind: "and" | "or"; children: DraftNode[] };

/** Path from the root: child indices ("not" has the single index 0). */
export type Path = number[];

export interface Diagnostic {
  path: Path;
  message: string;
}

export interface RuleDraft {
  typeName: string;
  expr: DraftNode | null;
  dirty: boolean;
}

export function emptyDraft(typeName = ""): RuleDraft {
  return { typeName, expr: null, dirty: false };
}

export function relNode(root: number | null = null, edge: string | null = null): DraftNode {
  return { kind: "rel", root, edge };
}

export function opNode(kind: "and" | "or" | "not"): DraftNode {
  return kind === "not" ? { kind, child: null } : { kind, children: [] };
}

function cloneNode(node: DraftNode): DraftNode {
  switch (node.kind) {
    case "rel":
      return { ...node };
    case "not":
      return { kind: "not", child: node.child ? cloneNode(node.child) : null };
    default:
      return { kind: node.kind, children: node.children.map(cloneNode) };
  }
}

export function getNode(draft: RuleDraft, path: Path): DraftNode | null {
  let node = draft.expr;
  for (const index of path) {
    if (!node) return null;
    if (node.kind === "not") {
      if (index !== 0) return null;
      node = node.child;
    } else if (node.kind === "and" || node.kind === "or") {
      node = node.children[index] ?? null;
    } else {
      return null;
    }
  }
  return node;
}

/** Structural edit: replace (or create) the node at `path`. Returns a new
 * draft; the input is never mutated, so event replays are reproducible. */
export function setNode(draft: RuleDraft, path: Path, node: DraftNode): RuleDraft {
  const fresh = cloneNode(node);
  if (path.length === 0) {
    return { ...draft, expr: fresh, dirty: true };
  }
  if (!draft.expr) throw new Error("cannot edit below an empty draft");
  const root = cloneNode(draft.expr);
  let cursor: DraftNode = root;
  for (let depth = 0; depth < path.length - 1; depth++) {
    const index = path[depth]!;
    if (cursor.kind === "not") {
      if (index !== 0 || !cursor.child) throw new Error(`no node at path ${JSON.stringify(path)}`);
      cursor = cursor.child;
    } else if (cursor.kind === "and" || cursor.kind === "or") {
      const next = cursor.children[index];
      if (!next) throw new Error(`no node at path ${JSON.stringify(path)}`);
      cursor = next;
    } else {
      throw new Error(`no node at path ${JSON.stringify(path)}`);
    }
  }
  const leaf = path[path.length - 1]!;
  if (cursor.kind === "not") {
    if (leaf !== 0) throw new Error(`"not" has a single slot`);
    cursor.child = fresh;
  } else if (cursor.kind === "and" || cursor.kind === "or") {
    if (leaf < 0 || leaf > cursor.children.length) throw new Error(`child index ${leaf} out of range`);
    cursor.children[leaf] = fresh;
  } else {
    throw new Error("relation nodes have no children");
  }
  return { ...draft, expr: root, dirty: true };
}

/** Delete the node at `path`; deleting the root empties the draft. */
export function deleteNode(draft: RuleDraft, path: Path): RuleDraft {
  if (path.length === 0) {
    return { ...draft, expr: null, dirty: true };
  }
  if (!draft.expr) return draft;
  const root = cloneNode(draft.expr);
  let cursor: DraftNode = root;
  for (let depth = 0; depth < path.length - 1; depth++) {
    const index = path[depth]!;
    if (cursor.kind === "not" && index === 0 && cursor.child) cursor = cursor.child;
    else if ((cursor.kind === "and" || cursor.kind === "or") && cursor.children[index])
      cursor = cursor.children[index]!;
    else return draft;
  }
  const leaf = path[path.length - 1]!;
  if (cursor.kind === "not" && leaf === 0) cursor.child = null;
  else if (cursor.kind === "and" || cursor.kind === "or") cursor.children.splice(leaf, 1);
  else return draft;
  return { ...draft, expr: root, dirty: true };
}

export function validate(draft: RuleDraft): Diagnostic[] {
  const out: Diagnostic[] = [];
  if (!draft.typeName.trim()) out.push({ path: [], message: "type name is required" });
  if (draft.typeName.trim() === "Other") out.push({ path: [], message: '"Other" is the implicit catch-all' });
  if (!draft.expr) {
    out.push({ path: [], message: "expression is empty" });
    return out;
  }
  const walk = (node: DraftNode, path: Path): void => {
    switch (node.kind) {
      case "rel":
        if (node.root === null) out.push({ path, message: "pick a root entity" });
        if (!node.edge) out.push({ path, message: "pick an edge kind" });
        return;
      case "not":
        if (!node.child) out.push({ path, message: '"not" needs an operand' });
        else walk(node.child, [...path, 0]);
        return;
      default:
        if (node.children.length < 2)
          out.push({ path, message: `"${node.kind}" needs at least 2 operands` });
        node.children.forEach((child, i) => walk(child, [...path, i]));
    }
  };
  walk(draft.expr, []);
  return out;
}

export function canSubmit(draft: RuleDraft): boolean {
  return validate(draft).length === 0;
}

export function serialize(draft: RuleDraft): ExprJson {
  const problems = validate(draft);
  if (problems.length) {
    const first = problems[0]!;
    throw new Error(`invalid draft at [${first.path.join(".")}]: ${first.message}`);
  }
  const emit = (node: DraftNode): ExprJson => {
    switch (node.kind) {
      case "rel":
        return { op: "rel", root: node.root!, edge: node.edge! };
      case "not":
        return { op: "not", arg: emit(node.child!) };
      default:
        return { op: node.kind, args: node.children.map(emit) };
    }
  };
  return emit(draft.expr!);
}

export function describe(node: DraftNode | null): string {
  if (!node) return "(empty)";
  switch (node.kind) {
    case "rel":
      return node.root === null || !node.edge ? "(incomplete relation)" : `${node.edge}(${node.root})`;
    case "not":
      return `not(${describe(node.child)})`;
    default:
      return `${node.kind}(${node.children.map(describe).join(", ")})`;
  }
}
