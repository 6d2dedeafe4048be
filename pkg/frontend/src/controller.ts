// Session controller: owns the toggles, talks to the API, and enforces one
// in-flight request per session view. All durable state lives server-side;
// the controller can be thrown away and rebuilt from GETs at any moment.

import {
  ApiError,
  type IterationOutcome,
  type SessionMetrics,
  type SessionSnapshot,
  type SessionView,
} from "./api.js";
import { buildView, canSubmit, feedbackPayload, type ElicitationView, type Toggle } from "./model.js";

/** The slice of the service the controller drives; ElicitClient satisfies it. */
export interface SessionApi {
  getSession(id: string): Promise<SessionView>;
  postQuery(id: string): Promise<SessionView>;
  postFeedback(id: string, answers: Record<string, number>): Promise<IterationOutcome>;
  getMetrics(id: string): Promise<SessionMetrics>;
  getSnapshot(id: string): Promise<SessionSnapshot>;
}

export class SessionController {
  private session: SessionView | null = null;
  private history: number[] = [];
  private toggles = new Map<string, Toggle>();
  private maxIterations: number | null = null;
  private error: string | null = null;
  private updating = false;
  private busy = false;

  constructor(
    private readonly api: SessionApi,
    private readonly sessionId: string,
    private readonly onChange: (view: ElicitationView) => void = () => {},
  ) {}

  view(): ElicitationView {
    if (this.session === null) throw new Error("controller not initialized");
    return buildView(this.session, this.history, this.toggles, {
      maxIterations: this.maxIterations,
      updating: this.updating,
      error: this.error,
    });
  }

  private emit(): void {
    this.onChange(this.view());
  }

  /** Fetch everything the view needs; safe to call again after a reload. */
  async initialize(): Promise<void> {
    this.session = await this.api.getSession(this.sessionId);
    const metrics = await this.api.getMetrics(this.sessionId);
    this.history = metrics.mse_history;
    const snap = await this.api.getSnapshot(this.sessionId);
    this.maxIterations = snap.config.max_iterations;
    this.emit();
  }

  private async refresh(): Promise<void> {
    this.session = await this.api.getSession(this.sessionId);
    const metrics = await this.api.getMetrics(this.sessionId);
    this.history = metrics.mse_history;
  }

  /** Ask the server for the next feature batch if none is pending. */
  async requestQuery(): Promise<void> {
    if (this.busy || this.session === null) return;
    if (this.session.terminal || this.session.pending_query !== null) return;
    this.busy = true;
    try {
      this.session = await this.api.postQuery(this.sessionId);
      this.error = null;
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      this.error = err.detail;
    } finally {
      this.busy = false;
    }
    this.emit();
  }

  setToggle(feature: string, value: Toggle): void {
    const pending = this.session?.pending_query;
    if (!pending || !pending.features.includes(feature)) return;
    this.toggles.set(feature, value);
    this.emit();
  }

  /**
   * Post the collected judgments. On a server rejection the toggles are
   * kept untouched and the error detail is surfaced verbatim so the user
   * can correct and retry.
   */
  async submit(): Promise<void> {
    if (this.busy || this.session === null) return;
    const current = this.view();
    if (!canSubmit(current)) return;
    this.busy = true;
    this.updating = true;
    this.error = null;
    this.emit();
    try {
      await this.api.postFeedback(this.sessionId, feedbackPayload(current));
      this.toggles.clear();
      await this.refresh();
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      this.error = err.detail;
    } finally {
      this.updating = false;
      this.busy = false;
    }
    this.emit();
  }
}
