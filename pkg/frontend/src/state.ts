/**
 * View model for the exploration workflow.
 *
 * Holds the dataset summary, the displayed round (charts + hint chips), the
 * round history timeline, and the pending flag that serializes mutating
 * requests (at most one in flight; the UI waits for the server's payload
 * rather than rendering optimistically). All server access goes through the
 * injected ApiClient, so tests drive the model with a fake.
 */

import { ApiClient, ApiError, SessionOptions } from "./api.js";
import type {
  ChartSpec,
  DatasetDescription,
  MarkKind,
  RoundPayload,
} from "./types.js";
import { allowedMarks, reencode, switchBlocker } from "./markswitch.js";

export interface ChartView {
  rank: number;
  query: string;
  crf: number;
  spec: ChartSpec;        // possibly re-encoded by a client-side mark switch
  originalSpec: ChartSpec;
}

export interface ViewState {
  dataset: DatasetDescription | null;
  sessionId: string | null;
  round: RoundPayload | null;
  charts: ChartView[];
  history: RoundPayload[];     // completed earlier rounds, oldest first
  historyView: number | null;  // past round number shown read-only
  keptUnion: string[];
  pending: boolean;
  error: string | null;
  zoomedChart: number | null;  // index into charts
  dataViewChart: number | null;
}

export type Listener = (state: ViewState) => void;

function chartsOf(round: RoundPayload): ChartView[] {
  return round.recommendations.map((rec) => ({
    rank: rec.rank,
    query: rec.query,
    crf: rec.score.crf,
    spec: rec.spec,
    originalSpec: rec.spec,
  }));
}

export class App {
  state: ViewState = {
    dataset: null,
    sessionId: null,
    round: null,
    charts: [],
    history: [],
    historyView: null,
    keptUnion: [],
    pending: false,
    error: null,
    zoomedChart: null,
    dataViewChart: null,
  };

  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient,
              private readonly options: SessionOptions = {}) {}

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  /** Upload a dataset and render round 1. */
  async uploadAndStart(name: string, csvText: string): Promise<void> {
    if (this.state.pending) return;
    this.patch({ pending: true, error: null });
    try {
      const dataset = await this.api.uploadDataset(name, csvText);
      const round = await this.api.createSession(dataset.dataset_id, this.options);
      this.patch({
        dataset,
        sessionId: round.session_id,
        round,
        charts: chartsOf(round),
        history: [],
        historyView: null,
        keptUnion: [],
        pending: false,
        zoomedChart: null,
        dataViewChart: null,
      });
    } catch (err) {
      this.patch({ pending: false, error: describe(err) });
    }
  }

  /** Apply a hint chip; the displayed round moves into the history timeline. */
  async selectHint(hintId: string): Promise<void> {
    const { sessionId, round, pending } = this.state;
    if (pending || !sessionId || !round) return;  // double-clicks are ignored
    this.patch({ pending: true, error: null });
    try {
      const next = await this.api.applyHint(sessionId, hintId);
      this.patch({
        round: next,
        charts: chartsOf(next),
        history: [...this.state.history, round],
        historyView: null,
        pending: false,
        zoomedChart: null,
        dataViewChart: null,
      });
    } catch (err) {
      if (err instanceof ApiError && err.body.code === "conflict") {
        // stale round: refetch the authoritative state and re-render
        const summary = await this.api.getSession(sessionId);
        this.patch({
          round: summary.current,
          charts: chartsOf(summary.current),
          keptUnion: summary.kept_union,
          pending: false,
          error: err.body.message,
        });
        return;
      }
      this.patch({ pending: false, error: describe(err) });
    }
  }

  /** Persist kept charts for the displayed round. */
  async keepCharts(queries: string[]): Promise<void> {
    const { sessionId, round } = this.state;
    if (!sessionId || !round) return;
    try {
      const keptUnion = await this.api.recordKept(sessionId, round.round, queries);
      this.patch({ keptUnion });
    } catch (err) {
      this.patch({ error: describe(err) });
    }
  }

  /** Read-only view of an earlier round from the history timeline. */
  historyRound(number: number): RoundPayload | null {
    return this.state.history.find((r) => r.round === number) ?? null;
  }

  showHistory(number: number | null): void {
    if (number !== null && this.historyRound(number) === null) return;
    this.patch({ historyView: number });
  }

  // --- chart interactions (client-side only) -------------------------------

  zoomChart(index: number | null): void {
    this.patch({ zoomedChart: index });
  }

  viewData(index: number | null): void {
    this.patch({ dataViewChart: index });
  }

  /** Marks this chart may legally switch to, per the served rule metadata. */
  switchTargets(index: number): MarkKind[] {
    const chart = this.state.charts[index];
    const round = this.state.round;
    if (!chart || !round) return [];
    return allowedMarks(chart.spec, round.mark_rules);
  }

  /** Tooltip text for a disabled switch control, or null when enabled. */
  switchTooltip(index: number, mark: MarkKind): string | null {
    const chart = this.state.charts[index];
    const round = this.state.round;
    if (!chart || !round) return "no chart";
    return switchBlocker(chart.spec, mark, round.mark_rules);
  }

  switchMark(index: number, mark: MarkKind): void {
    const chart = this.state.charts[index];
    const round = this.state.round;
    if (!chart || !round) return;
    if (switchBlocker(chart.spec, mark, round.mark_rules) !== null) return;
    const charts = [...this.state.charts];
    charts[index] = { ...chart, spec: reencode(chart.spec, mark) };
    this.patch({ charts });
  }

  resetMark(index: number): void {
    const chart = this.state.charts[index];
    if (!chart) return;
    const charts = [...this.state.charts];
    charts[index] = { ...chart, spec: chart.originalSpec };
    this.patch({ charts });
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.body.code}: ${err.body.message}`;
  return err instanceof Error ? err.message : String(err);
}
