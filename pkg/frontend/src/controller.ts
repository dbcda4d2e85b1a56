// View-model for the review queue: all state transitions live here so the
// DOM layer stays a dumb renderer and tests can drive the full flow
// headlessly against a live service.

import { ApiError, ReviewApi, ReviewItem } from './api.js';

export interface Banner {
  kind: 'error' | 'conflict' | 'info';
  message: string;
}

export interface ViewState {
  stage: string;
  counts: Record<string, number>;
  openTotal: number;
  item: ReviewItem | null;
  queueEmpty: boolean;
  editOpen: boolean;
  editText: string;
  tokenCount: number;
  tokenLimit: number;
  overLimit: boolean;
  banner: Banner | null;
  busy: boolean;
}

export const STAGES = ['pair_check', 'refine', 'assess_text', 'assess_image', 'compress'];

type Listener = (state: ViewState) => void;

export class ReviewController {
  private state: ViewState = {
    stage: STAGES[0],
    counts: {},
    openTotal: 0,
    item: null,
    queueEmpty: true,
    editOpen: false,
    editText: '',
    tokenCount: 0,
    tokenLimit: 77,
    overLimit: false,
    banner: null,
    busy: false,
  };
  private listeners: Listener[] = [];

  constructor(private api: ReviewApi) {}

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  snapshot(): ViewState {
    return { ...this.state };
  }

  private patch(changes: Partial<ViewState>): void {
    this.state = { ...this.state, ...changes };
    for (const fn of this.listeners) fn(this.state);
  }

  /** Refresh queue counts; rendered numbers always equal the service's. */
  async refreshCounts(): Promise<void> {
    const counts = await this.api.queues();
    this.patch({ counts: counts.queues, openTotal: counts.open_total });
  }

  async selectStage(stage: string): Promise<void> {
    this.patch({ stage, banner: null });
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    this.patch({ busy: true, editOpen: false, editText: '', overLimit: false, tokenCount: 0 });
    try {
      const item = await this.api.next(this.state.stage);
      this.patch({ item, queueEmpty: item === null, busy: false });
      await this.refreshCounts();
    } catch (err) {
      this.patch({
        busy: false,
        banner: { kind: 'error', message: describe(err) },
      });
    }
  }

  /** Allowed verdicts come from the item's stage, mirroring the server. */
  allowedVerdicts(): string[] {
    const stage = this.state.item?.stage ?? this.state.stage;
    switch (stage) {
      case 'pair_check':
        return ['retain', 'discard'];
      case 'compress':
        return ['edit', 'discard'];
      default:
        return ['retain', 'edit', 'discard'];
    }
  }

  async openEditor(initial?: string): Promise<void> {
    const text = initial ?? this.state.item?.payload.text ?? '';
    this.patch({ editOpen: true });
    await this.setEditText(text);
  }

  /** The live token counter defers to the server's tokenizer. */
  async setEditText(text: string): Promise<void> {
    const result = await this.api.tokenize(text);
    this.patch({
      editText: text,
      tokenCount: result.token_count,
      tokenLimit: result.limit,
      overLimit: result.token_count > result.limit,
    });
  }

  canSubmit(verdict: string): boolean {
    if (!this.state.item || this.state.busy) return false;
    if (!this.allowedVerdicts().includes(verdict)) return false;
    if (verdict === 'edit') {
      return this.state.editText.trim().length > 0 && !this.state.overLimit;
    }
    return true;
  }

  /** Submit a decision and auto-advance; a lost race (someone else decided
   *  first) shows a conflict banner and advances without corrupting state. */
  async submit(verdict: string): Promise<void> {
    const item = this.state.item;
    if (!item) return;
    if (!this.canSubmit(verdict)) {
      this.patch({
        banner: {
          kind: 'error',
          message:
            verdict === 'edit' && this.state.overLimit
              ? `edit is ${this.state.tokenCount}/${this.state.tokenLimit} tokens; trim it before submitting`
              : `verdict ${verdict} is not available for this item`,
        },
      });
      return;
    }
    this.patch({ busy: true });
    try {
      await this.api.decide(item.id, verdict, verdict === 'edit' ? this.state.editText : undefined);
      this.patch({ busy: false, banner: { kind: 'info', message: `${verdict} recorded` } });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.patch({
          busy: false,
          banner: { kind: 'conflict', message: 'already decided by another reviewer; advancing' },
        });
      } else {
        this.patch({ busy: false, banner: { kind: 'error', message: describe(err) } });
        return; // retryable: keep the current item on screen
      }
    }
    await this.loadNext();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}
