// In-memory stand-in for the review service, implementing just enough of
// the HTTP surface (as a fetch function) for unit-testing the controller
// and renderer without a backend process.

import type { ReviewItem } from '../src/api.js';

const VERDICTS: Record<string, string[]> = {
  pair_check: ['retain', 'discard'],
  refine: ['retain', 'edit', 'discard'],
  assess_text: ['retain', 'edit', 'discard'],
  assess_image: ['retain', 'edit', 'discard'],
  compress: ['edit', 'discard'],
};

const TOKEN_LIMIT = 77;

function countTokens(text: string): number {
  return (text.match(/\w+|[^\w\s]/gu) ?? []).length;
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export class FakeService {
  items: ReviewItem[] = [];
  failNext = false; // set to make the next request blow up with a 500

  seed(stage: string, tripletId: string, payload: ReviewItem['payload'] = {}): ReviewItem {
    const item: ReviewItem = {
      id: `rv-${(this.items.length + 1).toString().padStart(6, '0')}`,
      stage,
      triplet_id: tripletId,
      payload: { ref_uri: 'vec://1.0', target_uri: 'vec://0.9', text: 'a text', ...payload },
      created_at: `t${this.items.length}`,
      seq: this.items.length + 1,
      state: 'open',
      decision: null,
    };
    this.items.push(item);
    return item;
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = new URL(String(input), 'http://fake');
    if (this.failNext) {
      this.failNext = false;
      return json(500, { detail: 'synthetic failure' });
    }
    const path = url.pathname;

    if (path === '/queues') {
      const queues: Record<string, number> = {
        pair_check: 0, refine: 0, assess_text: 0, assess_image: 0, compress: 0,
      };
      for (const item of this.items) if (item.state === 'open') queues[item.stage] += 1;
      const open_total = Object.values(queues).reduce((a, b) => a + b, 0);
      return json(200, { queues, open_total });
    }

    const nextMatch = path.match(/^\/queues\/([^/]+)\/next$/);
    if (nextMatch) {
      const item = this.items.find((i) => i.state === 'open' && i.stage === nextMatch[1]);
      return item ? json(200, item) : json(404, { detail: 'queue empty' });
    }

    const decideMatch = path.match(/^\/items\/([^/]+)\/decision$/);
    if (decideMatch && init?.method === 'POST') {
      const item = this.items.find((i) => i.id === decideMatch[1]);
      if (!item) return json(404, { detail: 'unknown item' });
      if (item.state === 'decided') return json(409, { detail: 'already decided' });
      const body = JSON.parse(String(init.body)) as { verdict: string; edited_text: string | null };
      if (!VERDICTS[item.stage].includes(body.verdict)) {
        return json(422, { detail: `verdict ${body.verdict} not allowed for ${item.stage}` });
      }
      if (body.verdict === 'edit') {
        const count = countTokens(body.edited_text ?? '');
        if (count > TOKEN_LIMIT) {
          return json(422, { detail: `edited text has ${count} tokens, over the ${TOKEN_LIMIT}-token limit` });
        }
      }
      item.state = 'decided';
      item.decision = {
        item_id: item.id,
        verdict: body.verdict,
        edited_text: body.edited_text,
        reviewer: 'fake',
        decided_at: 'now',
      };
      return json(200, item);
    }

    const itemMatch = path.match(/^\/items\/([^/]+)$/);
    if (itemMatch) {
      const item = this.items.find((i) => i.id === itemMatch[1]);
      return item ? json(200, item) : json(404, { detail: 'unknown item' });
    }

    if (path === '/tokenize') {
      const text = url.searchParams.get('text') ?? '';
      return json(200, { token_count: countTokens(text), limit: TOKEN_LIMIT, tokenizer: 'fake' });
    }

    const assetMatch = path.match(/^\/assets\/([^/]+)$/);
    if (assetMatch) {
      return json(200, { id: assetMatch[1], uri: `vec://0.5`, split: 'train' });
    }

    return json(404, { detail: `no route for ${path}` });
  };
}
