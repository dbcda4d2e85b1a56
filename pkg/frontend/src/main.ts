import { ReviewApi } from './api.js';
import { ReviewController } from './controller.js';
import { ReviewPage } from './render.js';

function reviewerId(): string {
  const key = 'reviewer-id';
  let id = window.localStorage.getItem(key);
  if (!id) {
    id = `reviewer-${Math.random().toString(36).slice(2, 8)}`;
    window.localStorage.setItem(key, id);
  }
  return id;
}

const baseUrl = window.location.origin;
const api = new ReviewApi(baseUrl, reviewerId());
const controller = new ReviewController(api);
const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');
new ReviewPage(root, api, controller);

void controller.refreshCounts().then(() => controller.loadNext());
