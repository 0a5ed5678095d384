import type { AuditTaskView } from "./auditTask.js";
import type { LabelTaskView } from "./labelTask.js";
import { AUDIT_CATEGORIES, type LabelVerdict } from "./types.js";

const VERDICT_KEYS: Record<string, LabelVerdict> = {
  y: "yes",
  m: "maybe",
  n: "no",
};

export type ActiveView =
  | { kind: "label"; view: LabelTaskView }
  | { kind: "audit"; view: AuditTaskView }
  | null;

/** Route keydown events to the active task view.
 * Labels: 1-8 pick an option, y/m/n answer it, Enter submits.
 * Audits: 1/2/3 pick the category, Enter submits. */
export function handleKey(active: ActiveView, key: string): boolean {
  if (!active) return false;
  if (active.kind === "label") {
    const view = active.view;
    if (key >= "1" && key <= "8") {
      view.focusRow(Number(key) - 1);
      return true;
    }
    const verdict = VERDICT_KEYS[key.toLowerCase()];
    if (verdict) {
      view.setVerdict(view.focusedRow(), verdict);
      return true;
    }
    if (key === "Enter") {
      view.trySubmit();
      return true;
    }
    return false;
  }
  if (key >= "1" && key <= "3") {
    const category = AUDIT_CATEGORIES[Number(key) - 1];
    if (category) active.view.select(category);
    return true;
  }
  if (key === "Enter") {
    active.view.trySubmit();
    return true;
  }
  return false;
}

export function installKeyboard(
  doc: Document,
  getActive: () => ActiveView,
): () => void {
  const listener = (event: Event) => {
    const key = (event as KeyboardEvent).key;
    if (handleKey(getActive(), key)) event.preventDefault();
  };
  doc.addEventListener("keydown", listener);
  return () => doc.removeEventListener("keydown", listener);
}
