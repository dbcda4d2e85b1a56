// Typed client for the review-service HTTP API. The UI never fabricates
// state: everything rendered comes from these calls.

export interface QueueCounts {
  queues: Record<string, number>;
  open_total: number;
}

export interface Decision {
  item_id: string;
  verdict: string;
  edited_text: string | null;
  reviewer: string;
  decided_at: string;
}

export interface ReviewItem {
  id: string;
  stage: string;
  triplet_id: string;
  payload: {
    ref_id?: string;
    target_id?: string;
    ref_uri?: string;
    target_uri?: string;
    text?: string;
    answers?: boolean[];
    rationale?: string;
    target_rank?: number;
    token_count?: number;
    limit?: number;
    removed_sentences?: string[];
    suggested_actions?: string[];
  };
  created_at: string;
  seq: number;
  state: 'open' | 'decided';
  decision: Decision | null;
}

export interface TokenizeResult {
  token_count: number;
  limit: number;
  tokenizer: string;
}

export type Asset =
  | { kind: 'image'; url: string }
  | { kind: 'descriptor'; text: string };

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function toApiError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ReviewApi {
  constructor(
    private baseUrl: string,
    private reviewerId: string = 'anonymous',
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as T;
  }

  async queues(): Promise<QueueCounts> {
    return this.getJson<QueueCounts>('/queues');
  }

  /** Oldest open item for a stage, or null when the queue is empty. */
  async next(stage: string): Promise<ReviewItem | null> {
    const resp = await this.fetchFn(`${this.baseUrl}/queues/${stage}/next`);
    if (resp.status === 404) return null;
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as ReviewItem;
  }

  async item(id: string): Promise<ReviewItem> {
    return this.getJson<ReviewItem>(`/items/${id}`);
  }

  async decide(id: string, verdict: string, editedText?: string): Promise<ReviewItem> {
    const resp = await this.fetchFn(`${this.baseUrl}/items/${id}/decision`, {
      method: 'POST',
      headers: {
        'Content-Type': 'application/json',
        'X-Reviewer-Id': this.reviewerId,
      },
      body: JSON.stringify({ verdict, edited_text: editedText ?? null }),
    });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as ReviewItem;
  }

  /** Token counting is served by the backend so the count always matches
   *  the pipeline's tokenizer. */
  async tokenize(text: string): Promise<TokenizeResult> {
    const params = new URLSearchParams({ text });
    return this.getJson<TokenizeResult>(`/tokenize?${params.toString()}`);
  }

  /** Image payloads pass through /assets/{id}; non-file URIs come back as
   *  JSON descriptors and render as placeholders. */
  async asset(imageId: string): Promise<Asset> {
    const resp = await this.fetchFn(`${this.baseUrl}/assets/${imageId}`);
    if (!resp.ok) throw await toApiError(resp);
    const contentType = resp.headers.get('content-type') ?? '';
    if (contentType.startsWith('application/json')) {
      const body = await resp.json();
      return { kind: 'descriptor', text: `${body.id}: ${body.uri}` };
    }
    const blob = await resp.blob();
    return { kind: 'image', url: URL.createObjectURL(blob) };
  }
}
