import { imageUrl, taskImage } from "./image.js";
import { LABEL_VERDICTS, type LabelVerdict, type Task } from "./types.js";

export const INSTRUCTIONS =
  "For each candidate label, answer yes if you are 95% sure that the label " +
  "is indeed present in the image, no if you are 95% sure that it is not " +
  "present, and maybe otherwise.";

export interface LabelTaskView {
  element: HTMLElement;
  /** Current on-screen selection per option, null while unset. */
  verdicts(): (LabelVerdict | null)[];
  setVerdict(row: number, verdict: LabelVerdict): void;
  focusRow(row: number): void;
  focusedRow(): number;
  submitButton: HTMLButtonElement;
  /** Submit iff every option is answered; no-op otherwise. */
  trySubmit(): void;
}

export function renderLabelTask(
  doc: Document,
  task: Task,
  opts: {
    imageBaseUrl: string;
    classNames?: Map<number, string>;
    onSubmit: (verdicts: LabelVerdict[]) => void;
  },
): LabelTaskView {
  const root = doc.createElement("section");
  root.className = "task label-task";
  root.dataset.taskId = task.task_id;

  const instructions = doc.createElement("p");
  instructions.className = "instructions";
  instructions.textContent = INSTRUCTIONS;
  root.appendChild(instructions);

  root.appendChild(taskImage(doc, imageUrl(opts.imageBaseUrl, task.image_id)));

  const selections: (LabelVerdict | null)[] = task.options.map(() => null);
  let focused = 0;
  const rows: HTMLElement[] = [];

  const submit = doc.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Submit answers";
  submit.disabled = true;

  const refresh = () => {
    submit.disabled = selections.some((v) => v === null);
    rows.forEach((row, i) => row.classList.toggle("focused", i === focused));
  };

  const list = doc.createElement("ol");
  list.className = "options";
  task.options.forEach((classId, rowIndex) => {
    const row = doc.createElement("li");
    row.className = "option";
    row.dataset.classId = String(classId);
    const name = doc.createElement("span");
    name.className = "option-name";
    name.textContent = opts.classNames?.get(classId) ?? `class ${classId}`;
    row.appendChild(name);

    const controls = doc.createElement("span");
    controls.className = "verdict-controls";
    for (const verdict of LABEL_VERDICTS) {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = `verdict verdict-${verdict}`;
      button.dataset.verdict = verdict;
      button.textContent = verdict;
      button.addEventListener("click", () => {
        focused = rowIndex;
        setVerdict(rowIndex, verdict);
      });
      controls.appendChild(button);
    }
    row.appendChild(controls);
    rows.push(row);
    list.appendChild(row);
  });
  root.appendChild(list);

  const hint = doc.createElement("p");
  hint.className = "shortcut-hint";
  hint.textContent =
    "Shortcuts: 1-8 select a label, y / m / n answer it, Enter submits.";
  root.appendChild(hint);
  root.appendChild(submit);

  function setVerdict(row: number, verdict: LabelVerdict): void {
    if (row < 0 || row >= selections.length) return;
    selections[row] = verdict;
    const buttons = rows[row]!.querySelectorAll("button.verdict");
    buttons.forEach((b) =>
      b.classList.toggle(
        "selected",
        (b as HTMLElement).dataset.verdict === verdict,
      ),
    );
    // Answering advances focus to the next unanswered option.
    const next = selections.findIndex((v, i) => v === null && i > row);
    focused = next >= 0 ? next : row;
    refresh();
  }

  function trySubmit(): void {
    if (submit.disabled) return;
    opts.onSubmit(selections.map((v) => v as LabelVerdict));
  }

  submit.addEventListener("click", trySubmit);
  refresh();

  return {
    element: root,
    verdicts: () => [...selections],
    setVerdict,
    focusRow: (row: number) => {
      if (row >= 0 && row < rows.length) {
        focused = row;
        refresh();
      }
    },
    focusedRow: () => focused,
    submitButton: submit,
    trySubmit,
  };
}
