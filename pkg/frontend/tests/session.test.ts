// Scripted review session against the real service and pipeline: spawns the
// Python review service seeded by an engineered pipeline run, drives the UI
// controller through one decision at each manual stage, then resumes the
// pipeline and checks exactly those triplets advanced.

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiError, ReviewApi } from '../src/api.js';
import { ReviewController } from '../src/controller.js';

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.CIRLAB_PYTHON ?? 'python3';

let service: ChildProcess;
let workdir: string;
let design: {
  expected_open_queues: Record<string, number>;
  compress_review_id: string;
  text_flag_id: string;
  image_flag_id: string;
  resume_pair_id: string;
};

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const resp = await fetch(`${BASE}/queues`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error('review service did not come up');
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), 'review-session-'));
  service = spawn(
    PYTHON,
    ['scripts/serve_fixture.py', '--port', String(PORT), '--workdir', workdir],
    { cwd: join(__dirname, '..'), stdio: 'inherit' },
  );
  service.on('exit', (code, signal) => {
    if (code !== null && code !== 0) {
      console.error(`review service exited early: code=${code} signal=${signal}`);
    }
  });
  await waitForService();
  design = JSON.parse(readFileSync(join(workdir, 'design.json'), 'utf-8'));
}, 120_000);

afterAll(() => {
  service?.kill('SIGTERM');
});

describe('scripted review session', () => {
  it('renders true queue counts from the service', async () => {
    const controller = new ReviewController(new ReviewApi(BASE, 'scripted'));
    await controller.refreshCounts();
    const { counts } = controller.snapshot();
    expect(counts).toEqual(design.expected_open_queues);
  });

  it('blocks an 80-token edit client-side and server-side', async () => {
    const controller = new ReviewController(new ReviewApi(BASE, 'scripted'));
    await controller.selectStage('compress');
    expect(controller.snapshot().item?.triplet_id).toBe(design.compress_review_id);

    const overLong = 'word '.repeat(80).trim();
    await controller.openEditor(overLong);
    expect(controller.snapshot().tokenCount).toBe(80);
    expect(controller.snapshot().overLimit).toBe(true);
    expect(controller.canSubmit('edit')).toBe(false);
    await controller.submit('edit'); // no-op with an explanatory banner
    expect(controller.snapshot().banner?.message).toContain('80/77');
    expect(controller.snapshot().item?.state).toBe('open');

    // bypassing the client guard still hits the server's authoritative check
    const api = new ReviewApi(BASE, 'bypass');
    const itemId = controller.snapshot().item!.id;
    await expect(api.decide(itemId, 'edit', overLong)).rejects.toMatchObject({ status: 422 });
    const stillOpen = await api.item(itemId);
    expect(stillOpen.state).toBe('open');
  }, 30_000);

  it('decides one item of each manual stage type', async () => {
    const controller = new ReviewController(new ReviewApi(BASE, 'scripted'));

    // pair check: retain the first parked two-yes pair
    await controller.selectStage('pair_check');
    expect(controller.snapshot().item?.triplet_id).toBe(design.resume_pair_id);
    await controller.submit('retain');

    // assess (text): retain the flagged triplet
    await controller.selectStage('assess_text');
    expect(controller.snapshot().item?.triplet_id).toBe(design.text_flag_id);
    await controller.submit('retain');

    // assess (image): retain the flagged triplet
    await controller.selectStage('assess_image');
    expect(controller.snapshot().item?.triplet_id).toBe(design.image_flag_id);
    await controller.submit('retain');

    // compress: supply a compliant edit
    await controller.selectStage('compress');
    expect(controller.snapshot().item?.triplet_id).toBe(design.compress_review_id);
    await controller.openEditor('the table is small.');
    expect(controller.snapshot().overLimit).toBe(false);
    await controller.submit('edit');
    expect(controller.snapshot().queueEmpty).toBe(true);
  }, 30_000);

  it('pipeline resume advances exactly the decided triplets', () => {
    const out = join(workdir, 'resume');
    const run = spawnSync(
      PYTHON,
      [
        '-m', 'cirlab.cli', 'pipeline', 'run',
        '--manifest', join(workdir, 'fixture.jsonl'),
        '--out', out,
        '--store', join(workdir, 'review-log.jsonl'),
        '--seed', '0',
      ],
      { cwd: join(__dirname, '..'), encoding: 'utf-8' },
    );
    expect(run.status, run.stderr).toBe(0);

    const before = new Map(
      readFileSync(join(workdir, 'after-run1.jsonl'), 'utf-8')
        .trim().split('\n')
        .map((line) => {
          const rec = JSON.parse(line);
          return [rec.triplet_id as string, rec.status as string];
        }),
    );
    const after = new Map(
      readFileSync(join(out, 'manifest.jsonl'), 'utf-8')
        .trim().split('\n')
        .map((line) => {
          const rec = JSON.parse(line);
          return [rec.triplet_id as string, rec.status as string];
        }),
    );
    const decided = [
      design.resume_pair_id,
      design.text_flag_id,
      design.image_flag_id,
      design.compress_review_id,
    ];
    for (const id of decided) {
      expect(after.get(id), id).toBe('finalized');
    }
    for (const [id, status] of after) {
      if (!decided.includes(id)) {
        expect(status, id).toBe(before.get(id));
      }
    }
  }, 60_000);

  it('exactly-once conflicts render without corrupting either session', async () => {
    // seed a fresh conflict: both reviewers look at the same open pair item
    const alice = new ReviewController(new ReviewApi(BASE, 'alice'));
    const bob = new ReviewController(new ReviewApi(BASE, 'bob'));
    await alice.selectStage('pair_check');
    await bob.selectStage('pair_check');
    const contested = alice.snapshot().item;
    if (!contested) console.error('alice state:', JSON.stringify(alice.snapshot()));
    expect(contested).not.toBeNull();
    expect(bob.snapshot().item?.id).toBe(contested!.id);

    await alice.submit('discard');
    await bob.submit('retain');
    expect(bob.snapshot().banner?.kind).toBe('conflict');
    expect(bob.snapshot().busy).toBe(false);
    // the first decision stands
    const api = new ReviewApi(BASE, 'observer');
    const final = await api.item(contested!.id);
    expect(final.decision?.verdict).toBe('discard');
    expect(final.decision?.reviewer).toBe('alice');
    // both sessions advanced to the next open pair item (or a clean empty state)
    expect(alice.snapshot().item?.id).not.toBe(contested!.id);
    expect(bob.snapshot().item?.id).not.toBe(contested!.id);
  }, 30_000);
});
