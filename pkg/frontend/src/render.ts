// DOM rendering over the controller's view state. No framework: the page is
// a queue tab strip, one item card with the image pair, and the decision
// buttons with an optional edit box.

import { Asset, ReviewApi, ReviewItem } from './api.js';
import { ReviewController, STAGES, ViewState } from './controller.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function imagePane(api: ReviewApi, label: string, imageId?: string, uri?: string) {
  const pane = el('div', 'image-pane');
  pane.appendChild(el('div', 'image-label', label));
  if (imageId) {
    try {
      const asset: Asset = await api.asset(imageId);
      if (asset.kind === 'image') {
        const img = el('img');
        img.src = asset.url;
        img.alt = `${label} image`;
        pane.appendChild(img);
        return pane;
      }
      pane.appendChild(el('div', 'image-placeholder', asset.text));
      return pane;
    } catch {
      // fall through to the uri text
    }
  }
  pane.appendChild(el('div', 'image-placeholder', uri ?? 'no image'));
  return pane;
}

function answersBadge(answers?: boolean[]): HTMLElement {
  const row = el('div', 'answers');
  (answers ?? []).forEach((a, i) => {
    row.appendChild(el('span', a ? 'answer yes' : 'answer no', `Q${i + 1}: ${a ? 'Yes' : 'No'}`));
  });
  return row;
}

export class ReviewPage {
  private root: HTMLElement;

  constructor(
    root: HTMLElement,
    private api: ReviewApi,
    private controller: ReviewController,
  ) {
    this.root = root;
    controller.subscribe((state) => void this.render(state));
    document.addEventListener('keydown', (ev) => {
      if ((ev.target as HTMLElement | null)?.tagName === 'TEXTAREA') return;
      if (ev.key === 'r') void controller.submit('retain');
      if (ev.key === 'd') void controller.submit('discard');
      if (ev.key === 'e') void controller.openEditor();
    });
  }

  private async render(state: ViewState): Promise<void> {
    this.root.replaceChildren();

    const tabs = el('nav', 'tabs');
    for (const stage of STAGES) {
      const count = state.counts[stage] ?? 0;
      const tab = el('button', stage === state.stage ? 'tab active' : 'tab',
        `${stage} (${count})`);
      tab.dataset.stage = stage;
      tab.onclick = () => void this.controller.selectStage(stage);
      tabs.appendChild(tab);
    }
    this.root.appendChild(tabs);

    if (state.banner) {
      const banner = el('div', `banner ${state.banner.kind}`, state.banner.message);
      if (state.banner.kind === 'error') {
        const retry = el('button', 'retry', 'retry');
        retry.onclick = () => void this.controller.loadNext();
        banner.appendChild(retry);
      }
      this.root.appendChild(banner);
    }

    if (!state.item) {
      this.root.appendChild(
        el('div', 'empty-state', state.queueEmpty ? 'queue empty - nothing to review' : 'loading...'),
      );
      return;
    }
    this.root.appendChild(await this.card(state, state.item));
  }

  private async card(state: ViewState, item: ReviewItem): Promise<HTMLElement> {
    const card = el('section', 'item-card');
    card.dataset.itemId = item.id;
    card.appendChild(el('h2', 'item-title', `${item.stage} / ${item.triplet_id}`));

    const pair = el('div', 'image-pair');
    pair.appendChild(await imagePane(this.api, 'reference', item.payload.ref_id, item.payload.ref_uri));
    pair.appendChild(await imagePane(this.api, 'target', item.payload.target_id, item.payload.target_uri));
    card.appendChild(pair);

    if (item.payload.text) card.appendChild(el('p', 'mod-text', item.payload.text));
    if (item.payload.answers) card.appendChild(answersBadge(item.payload.answers));
    if (item.payload.target_rank !== undefined) {
      card.appendChild(el('p', 'rank', `unimodal target rank: ${item.payload.target_rank}`));
    }
    if (item.payload.suggested_actions?.length) {
      const row = el('div', 'suggestions');
      for (const action of item.payload.suggested_actions) {
        row.appendChild(el('span', 'suggestion', action));
      }
      card.appendChild(row);
    }

    const actions = el('div', 'actions');
    for (const verdict of this.controller.allowedVerdicts()) {
      const button = el('button', `verdict ${verdict}`, verdict);
      button.dataset.verdict = verdict;
      if (verdict === 'edit' && !state.editOpen) {
        button.onclick = () => void this.controller.openEditor();
      } else {
        button.disabled = !this.controller.canSubmit(verdict);
        button.onclick = () => void this.controller.submit(verdict);
      }
      actions.appendChild(button);
    }
    card.appendChild(actions);

    if (state.editOpen) {
      const editor = el('div', 'editor');
      const box = el('textarea', 'edit-box');
      box.value = state.editText;
      box.oninput = () => void this.controller.setEditText(box.value);
      editor.appendChild(box);
      const counter = el(
        'span',
        state.overLimit ? 'token-counter over' : 'token-counter',
        `${state.tokenCount}/${state.tokenLimit}`,
      );
      editor.appendChild(counter);
      card.appendChild(editor);
    }
    return card;
  }
}
