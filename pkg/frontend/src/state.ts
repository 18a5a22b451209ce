import { ApiClient, ApiRequestError } from "./api.js";
import type { Manifest, Task } from "./types.js";

export type SubmitOutcome = "applied" | "ignored" | "resynced";

export interface ViewState {
  manifest: Manifest | null;
  task: Task | null;
  pending: boolean;
  error: string | null;
  done: boolean;
}

/**
 * Session controller: one task on screen at a time, the server is the only
 * source of ranking truth. A submit while a request is in flight is a
 * no-op, and a stale-token rejection resynchronizes silently, so double
 * clicks and racing tabs cause exactly one state change.
 */
export class SessionController {
  readonly state: ViewState = {
    manifest: null,
    task: null,
    pending: false,
    error: null,
    done: false,
  };
  private listeners: Array<(s: ViewState) => void> = [];

  constructor(
    private api: ApiClient,
    readonly sessionId: string,
  ) {}

  onChange(fn: (s: ViewState) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  async refresh(): Promise<void> {
    this.state.manifest = await this.api.manifest(this.sessionId);
    this.state.done = this.state.manifest.phase === "done";
    if (this.state.done) {
      this.state.task = null;
    } else {
      this.state.task = await this.api.task(this.sessionId);
    }
    this.emit();
  }

  /** Wraps a mutation with the pending guard and stale-token recovery. */
  private async mutate(run: () => Promise<unknown>): Promise<SubmitOutcome> {
    if (this.state.pending) return "ignored";
    this.state.pending = true;
    this.state.error = null;
    this.emit();
    try {
      await run();
      return "applied";
    } catch (err) {
      if (err instanceof ApiRequestError && err.status === 409) {
        return "resynced";
      }
      this.state.error = err instanceof Error ? err.message : String(err);
      return "resynced";
    } finally {
      this.state.pending = false;
      await this.refresh();
    }
  }

  submitSort(order: string[]): Promise<SubmitOutcome> {
    const task = this.state.task;
    if (!task || task.kind !== "sort") return Promise.resolve("ignored");
    return this.mutate(() => this.api.submitOrder(this.sessionId, task.task_token, order));
  }

  submitChoice(choice: string): Promise<SubmitOutcome> {
    const task = this.state.task;
    if (!task || task.kind !== "compare") return Promise.resolve("ignored");
    return this.mutate(() => this.api.submitChoice(this.sessionId, task.task_token, choice));
  }

  undo(): Promise<SubmitOutcome> {
    const token = this.state.task?.task_token ?? this.state.manifest?.task_token;
    if (!token) return Promise.resolve("ignored");
    return this.mutate(() => this.api.undo(this.sessionId, token));
  }
}

/** Pure list-reorder helper used by the sort view (drag or buttons). */
export function moveItem(order: string[], from: number, to: number): string[] {
  const next = order.slice();
  const removed = next.splice(from, 1);
  if (removed.length === 0) return order.slice();
  next.splice(Math.max(0, Math.min(to, next.length)), 0, removed[0]!);
  return next;
}
