import type { TaskApi } from "./api.js";
import { renderAuditTask } from "./auditTask.js";
import { installKeyboard, type ActiveView } from "./keyboard.js";
import { renderLabelTask } from "./labelTask.js";
import type { Task } from "./types.js";

export interface AppOptions {
  raterId: string;
  imageBaseUrl: string;
  classNames?: Map<number, string>;
}

/** Single-page rater flow: fetch a task, collect verdicts, submit once,
 * then fetch the next task only after the acknowledgment arrives. */
export class App {
  private active: ActiveView = null;
  private inFlight = false;
  private removeKeyboard: (() => void) | null = null;

  constructor(
    private readonly api: TaskApi,
    private readonly root: HTMLElement,
    private readonly opts: AppOptions,
  ) {}

  async start(): Promise<void> {
    this.removeKeyboard = installKeyboard(
      this.root.ownerDocument,
      () => this.active,
    );
    await this.loadNext();
  }

  stop(): void {
    this.removeKeyboard?.();
    this.removeKeyboard = null;
  }

  /** The view currently on screen, for tests and shortcut routing. */
  current(): ActiveView {
    return this.active;
  }

  private async loadNext(): Promise<void> {
    this.active = null;
    this.root.replaceChildren();
    let task: Task | null;
    try {
      task = await this.api.nextTask(this.opts.raterId);
    } catch (err) {
      this.showError(`Could not fetch a task: ${String(err)}`, () =>
        this.loadNext(),
      );
      return;
    }
    if (task === null) {
      const done = this.doc().createElement("p");
      done.className = "all-done";
      done.textContent = "No tasks left for you. Thank you!";
      this.root.appendChild(done);
      return;
    }
    this.render(task);
  }

  private render(task: Task): void {
    const viewOpts = {
      imageBaseUrl: this.opts.imageBaseUrl,
      classNames: this.opts.classNames,
    };
    if (task.kind === "label-assessment") {
      const view = renderLabelTask(this.doc(), task, {
        ...viewOpts,
        onSubmit: (verdicts) => this.submit(task, verdicts, view.submitButton),
      });
      this.active = { kind: "label", view };
      this.root.appendChild(view.element);
    } else {
      const view = renderAuditTask(this.doc(), task, {
        ...viewOpts,
        onSubmit: (category) => this.submit(task, [category], view.submitButton),
      });
      this.active = { kind: "audit", view };
      this.root.appendChild(view.element);
    }
  }

  private async submit(
    task: Task,
    verdicts: string[],
    button: HTMLButtonElement,
  ): Promise<void> {
    if (this.inFlight) return; // at most one in-flight submission
    this.inFlight = true;
    button.disabled = true; // no double-submit: stays disabled once acked
    try {
      await this.api.submitAnswer(task.task_id, this.opts.raterId, verdicts);
    } catch (err) {
      this.inFlight = false;
      button.disabled = false;
      this.showError(`Submission failed: ${String(err)}`, null);
      return;
    }
    this.inFlight = false;
    await this.loadNext();
  }

  private showError(message: string, retry: (() => void) | null): void {
    const banner = this.doc().createElement("p");
    banner.className = "error-banner";
    banner.textContent = message;
    if (retry) {
      const button = this.doc().createElement("button");
      button.type = "button";
      button.textContent = "Retry";
      button.addEventListener("click", () => {
        banner.remove();
        retry();
      });
      banner.appendChild(button);
    }
    this.root.prepend(banner);
  }

  private doc(): Document {
    return this.root.ownerDocument;
  }
}
