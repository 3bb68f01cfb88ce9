import { Api, ApiError } from "./api.js";
import type { TaskView, Taxonomy } from "./types.js";

export interface LabelSelection {
  aspects: Set<string>;
  sentiment: Set<string>;
}

/**
 * Queue screen state: the fetched task list, the open task's checkbox
 * selection, and user-facing notices. The server remains the only label
 * state of record; every mutation here round-trips through the API.
 */
export class QueueController {
  tasks: TaskView[] = [];
  selection: "uncertainty" | "random_fallback" | null = null;
  openIndex: number | null = null;
  selected: LabelSelection = { aspects: new Set(), sentiment: new Set() };
  notice: string | null = null;
  error: string | null = null;
  exhausted = false;

  constructor(
    private api: Api,
    public taxonomy: Taxonomy,
    public threshold = 0.5,
    public annotator = "ui",
    public batchSize = 10,
  ) {}

  get openTask(): TaskView | null {
    return this.openIndex === null ? null : (this.tasks[this.openIndex] ?? null);
  }

  async load(): Promise<void> {
    this.error = null;
    try {
      const resp = await this.api.getTasks(this.batchSize, this.annotator);
      this.tasks = resp.tasks;
      this.selection = resp.selection;
      this.exhausted = false;
      if (this.tasks.length > 0) {
        this.open(0);
      } else {
        this.openIndex = null;
      }
    } catch (err) {
      if (err instanceof ApiError && err.code === "pool_exhausted") {
        this.tasks = [];
        this.openIndex = null;
        this.exhausted = true;
        return;
      }
      this.error = describe(err);
    }
  }

  /** Focus a task and pre-highlight classes the model scores >= threshold. */
  open(index: number): void {
    this.openIndex = index;
    this.selected = { aspects: new Set(), sentiment: new Set() };
    const task = this.tasks[index];
    if (!task || !task.predictions) return;
    task.predictions.aspect.forEach((p, i) => {
      if (p >= this.threshold) this.selected.aspects.add(this.taxonomy.aspects[i]);
    });
    task.predictions.sentiment.forEach((p, i) => {
      if (p >= this.threshold) this.selected.sentiment.add(this.taxonomy.sentiment[i]);
    });
  }

  toggle(kind: "aspects" | "sentiment", label: string): void {
    const set = this.selected[kind];
    if (set.has(label)) {
      set.delete(label);
    } else {
      set.add(label);
    }
  }

  /**
   * Submit the open task's labels. Empty selections go through the
   * confirmEmpty gate (a dialog in the DOM layer). Conflicts drop the task
   * with a notice; other failures keep it and surface the error inline.
   */
  async submit(confirmEmpty: () => boolean = () => true): Promise<boolean> {
    const task = this.openTask;
    if (!task) return false;
    const aspects = [...this.selected.aspects];
    const sentiment = [...this.selected.sentiment];
    if (aspects.length === 0 && sentiment.length === 0 && !confirmEmpty()) {
      return false;
    }
    this.error = null;
    this.notice = null;
    try {
      await this.api.submitLabels(task.doc_id, aspects, sentiment, this.annotator);
      this.removeOpenAndFocusNext();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        this.notice = `Task ${task.doc_id} was already labeled elsewhere; skipped.`;
        this.removeOpenAndFocusNext();
        return false;
      }
      this.error = describe(err);
      return false;
    }
  }

  private removeOpenAndFocusNext(): void {
    if (this.openIndex === null) return;
    this.tasks.splice(this.openIndex, 1);
    if (this.tasks.length === 0) {
      this.openIndex = null;
    } else {
      this.open(Math.min(this.openIndex, this.tasks.length - 1));
    }
  }
}

export function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

/** Fetch the taxonomy; a failure here is a blocking error for the whole UI. */
export async function loadTaxonomy(api: Api): Promise<Taxonomy> {
  return api.getTaxonomy();
}
