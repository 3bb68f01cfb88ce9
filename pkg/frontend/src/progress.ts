import { Api, ApiError } from "./api.js";
import { describe } from "./queue.js";
import type { Curve, Metrics, TrainStatus } from "./types.js";

/**
 * Progress screen state: pool counts and metrics, the learning curve, and
 * the retrain button. The button stays disabled while a job runs; a Busy
 * response just means someone else pressed it first, so it is treated as
 * "running", not an error.
 */
export class ProgressController {
  metrics: Metrics | null = null;
  curve: Curve | null = null;
  training: TrainStatus = { status: "idle", detail: null };
  error: string | null = null;

  constructor(private api: Api) {}

  get retrainDisabled(): boolean {
    return this.training.status === "running";
  }

  /** No completed rounds is an empty state, not an error. */
  async refresh(): Promise<void> {
    this.error = null;
    try {
      this.metrics = await this.api.metrics();
    } catch (err) {
      if (err instanceof ApiError && err.isNoRoundsYet) {
        this.metrics = null;
      } else {
        this.error = describe(err);
        return;
      }
    }
    try {
      this.curve = await this.api.curve();
    } catch (err) {
      if (err instanceof ApiError && err.isNoRoundsYet) {
        this.curve = null;
      } else {
        this.error = describe(err);
      }
    }
  }

  async retrain(): Promise<void> {
    this.error = null;
    try {
      await this.api.train();
      this.training = { status: "running", detail: null };
    } catch (err) {
      if (err instanceof ApiError && err.isBusy) {
        this.training = { status: "running", detail: null };
      } else {
        this.error = describe(err);
      }
    }
  }

  /** Poll /train/status until the job leaves "running", then refresh. */
  async pollUntilSettled(intervalMs = 500, maxPolls = 600): Promise<TrainStatus> {
    for (let i = 0; i < maxPolls; i++) {
      this.training = await this.api.trainStatus();
      if (this.training.status !== "running") {
        await this.refresh();
        return this.training;
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    return this.training;
  }
}
