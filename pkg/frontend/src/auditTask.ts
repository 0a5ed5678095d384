import { imageUrl, taskImage } from "./image.js";
import { AUDIT_CATEGORIES, type AuditCategory, type Task } from "./types.js";

const CATEGORY_LABELS: Record<AuditCategory, string> = {
  "clear-mistake": "Clear mistake",
  "not-a-mistake": "Not a mistake",
  undecidable: "Undecidable",
};

export interface AuditTaskView {
  element: HTMLElement;
  selected(): AuditCategory | null;
  select(category: AuditCategory): void;
  submitButton: HTMLButtonElement;
  trySubmit(): void;
}

export function renderAuditTask(
  doc: Document,
  task: Task,
  opts: {
    imageBaseUrl: string;
    classNames?: Map<number, string>;
    onSubmit: (category: AuditCategory) => void;
  },
): AuditTaskView {
  const audit = task.audit;
  if (!audit) throw new Error(`task ${task.task_id} has no audit payload`);
  const nameOf = (classId: number) =>
    opts.classNames?.get(classId) ?? `class ${classId}`;

  const root = doc.createElement("section");
  root.className = "task audit-task";
  root.dataset.taskId = task.task_id;

  const intro = doc.createElement("p");
  intro.className = "instructions";
  intro.textContent =
    `The model predicted "${nameOf(audit.predicted)}", which the ` +
    `${audit.metric} metric counts as a mistake. Decide whether it really is one.`;
  root.appendChild(intro);

  root.appendChild(taskImage(doc, imageUrl(opts.imageBaseUrl, task.image_id)));

  const predicted = doc.createElement("p");
  predicted.className = "predicted-label";
  predicted.textContent = `Model prediction: ${nameOf(audit.predicted)}`;
  root.appendChild(predicted);

  const correct = doc.createElement("div");
  correct.className = "correct-labels";
  const heading = doc.createElement("p");
  heading.textContent = "Correct label(s) according to the metric:";
  correct.appendChild(heading);
  for (const classId of audit.correct_labels) {
    const block = doc.createElement("figure");
    block.className = "correct-label";
    const caption = doc.createElement("figcaption");
    caption.textContent = nameOf(classId);
    block.appendChild(caption);
    const strip = doc.createElement("div");
    strip.className = "exemplar-strip";
    for (const exemplarId of audit.exemplars[String(classId)] ?? []) {
      const thumb = doc.createElement("img");
      thumb.className = "exemplar";
      thumb.src = imageUrl(opts.imageBaseUrl, exemplarId);
      thumb.alt = `example of ${nameOf(classId)}`;
      strip.appendChild(thumb);
    }
    block.appendChild(strip);
    correct.appendChild(block);
  }
  root.appendChild(correct);

  let choice: AuditCategory | null = null;
  const buttons = new Map<AuditCategory, HTMLButtonElement>();

  const submit = doc.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Submit";
  submit.disabled = true;

  const categories = doc.createElement("div");
  categories.className = "audit-categories";
  for (const category of AUDIT_CATEGORIES) {
    const button = doc.createElement("button");
    button.type = "button";
    button.className = `category category-${category}`;
    button.dataset.category = category;
    button.textContent = CATEGORY_LABELS[category];
    button.addEventListener("click", () => select(category));
    buttons.set(category, button);
    categories.appendChild(button);
  }
  root.appendChild(categories);

  const hint = doc.createElement("p");
  hint.className = "shortcut-hint";
  hint.textContent = "Shortcuts: 1 clear mistake, 2 not a mistake, 3 undecidable.";
  root.appendChild(hint);
  root.appendChild(submit);

  function select(category: AuditCategory): void {
    choice = category;
    for (const [cat, button] of buttons) {
      button.classList.toggle("selected", cat === category);
    }
    submit.disabled = false;
  }

  function trySubmit(): void {
    if (submit.disabled || choice === null) return;
    opts.onSubmit(choice);
  }

  submit.addEventListener("click", trySubmit);

  return {
    element: root,
    selected: () => choice,
    select,
    submitButton: submit,
    trySubmit,
  };
}
