/**
 * DOM wiring for the review client. All state lives in ReviewSession; this
 * file only renders it and forwards user input. Logic that needs tests sits
 * in session.ts / rle.ts / overlay.ts, which are DOM-free.
 */

import { ApiClient, formatCandidate } from './api.js';
import { fromKeyboardEvent, keyAction } from './keyboard.js';
import { buildOverlayImage, promptMarkers, trackColor } from './overlay.js';
import { decodeRle } from './rle.js';
import { ReviewSession } from './session.js';
import type { Rle } from './types.js';

const DISPLAY_SIZE = 512;

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('api');
  return fromQuery ?? 'http://localhost:8080';
}

const session = new ReviewSession(new ApiClient(apiBase()), window.localStorage);

const app = document.getElementById('app');
if (!app) throw new Error('missing #app container');

app.innerHTML = `
  <header>
    <h1>masktrack review</h1>
    <label>actor <input id="actor" type="text" spellcheck="false"></label>
    <div id="banner" hidden></div>
  </header>
  <main>
    <aside id="clips"><h2>Clips</h2><ul></ul></aside>
    <section id="viewer">
      <div id="stage">
        <img id="frame" alt="frame">
        <canvas id="overlay"></canvas>
      </div>
      <div id="nav">
        <button id="prev" title="left arrow">&#8592;</button>
        <span id="frame-label"></span>
        <button id="next" title="right arrow">&#8594;</button>
      </div>
      <div id="steps"></div>
      <div id="actions">
        <button id="accept" title="shortcut: a">Accept</button>
        <button id="reject" title="shortcut: r">Reject</button>
      </div>
      <div id="refine">
        <p class="hint">
          click = positive, shift-click = negative. Preview asks the segmenter
          for candidates; pick one to enable Commit.
        </p>
        <div id="prompt-count"></div>
        <button id="preview">Preview</button>
        <button id="clear">Clear clicks</button>
        <button id="commit" disabled>Commit</button>
        <ul id="candidates"></ul>
      </div>
    </section>
    <aside id="tracks"><h2>Tracks</h2><ul></ul></aside>
  </main>
`;

const el = {
  actor: document.getElementById('actor') as HTMLInputElement,
  banner: document.getElementById('banner') as HTMLDivElement,
  clips: document.querySelector('#clips ul') as HTMLUListElement,
  tracks: document.querySelector('#tracks ul') as HTMLUListElement,
  frame: document.getElementById('frame') as HTMLImageElement,
  overlay: document.getElementById('overlay') as HTMLCanvasElement,
  frameLabel: document.getElementById('frame-label') as HTMLSpanElement,
  steps: document.getElementById('steps') as HTMLDivElement,
  promptCount: document.getElementById('prompt-count') as HTMLDivElement,
  candidates: document.getElementById('candidates') as HTMLUListElement,
  prev: document.getElementById('prev') as HTMLButtonElement,
  next: document.getElementById('next') as HTMLButtonElement,
  accept: document.getElementById('accept') as HTMLButtonElement,
  reject: document.getElementById('reject') as HTMLButtonElement,
  preview: document.getElementById('preview') as HTMLButtonElement,
  clear: document.getElementById('clear') as HTMLButtonElement,
  commit: document.getElementById('commit') as HTMLButtonElement,
};

el.actor.value = session.actor;
el.actor.addEventListener('change', () => {
  session.actor = el.actor.value;
});

el.prev.addEventListener('click', () => session.prevFrame());
el.next.addEventListener('click', () => session.nextFrame());
el.accept.addEventListener('click', () => void session.accept());
el.reject.addEventListener('click', () => void session.reject());
el.preview.addEventListener('click', () => void session.preview());
el.clear.addEventListener('click', () => session.clearPrompts());
el.commit.addEventListener('click', () => void session.commit());

window.addEventListener('keydown', (e) => {
  const action = keyAction(fromKeyboardEvent(e));
  if (!action) return;
  e.preventDefault();
  if (action === 'prev-frame') session.prevFrame();
  else if (action === 'next-frame') session.nextFrame();
  else if (action === 'accept') void session.accept();
  else void session.reject();
});

el.overlay.addEventListener('click', (e) => {
  const detail = session.state.detail;
  if (!detail) return;
  const [h, w] = detail.dims;
  const rect = el.overlay.getBoundingClientRect();
  const x = Math.floor(((e.clientX - rect.left) / rect.width) * w);
  const y = Math.floor(((e.clientY - rect.top) / rect.height) * h);
  if (x < 0 || y < 0 || x >= w || y >= h) return;
  session.addClick(x, y, e.shiftKey || e.altKey);
});
el.overlay.addEventListener('contextmenu', (e) => e.preventDefault());

function drawOverlay(): void {
  const detail = session.state.detail;
  if (!detail) {
    el.overlay.getContext('2d')?.clearRect(0, 0, el.overlay.width, el.overlay.height);
    return;
  }
  const [h, w] = detail.dims;
  el.overlay.width = DISPLAY_SIZE;
  el.overlay.height = Math.round((DISPLAY_SIZE * h) / w);
  const ctx = el.overlay.getContext('2d');
  if (!ctx) return;
  ctx.clearRect(0, 0, el.overlay.width, el.overlay.height);

  let rle: Rle | null = null;
  let color = trackColor(detail.track.track_id);
  const chosen = session.state.chosen;
  if (chosen !== null && session.state.candidates[chosen]) {
    rle = session.state.candidates[chosen].mask;
    color = [255, 255, 255];
  } else {
    rle = session.currentEntry()?.mask ?? null;
  }
  if (rle) {
    const buffer = buildOverlayImage(decodeRle(rle), h, w, color);
    const off = document.createElement('canvas');
    off.width = w;
    off.height = h;
    off.getContext('2d')?.putImageData(new ImageData(buffer, w, h), 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, el.overlay.width, el.overlay.height);
  }

  const markers = promptMarkers(
    session.state.prompts,
    el.overlay.width / w,
    el.overlay.height / h,
  );
  for (const marker of markers) {
    ctx.beginPath();
    ctx.arc(marker.cx, marker.cy, 5, 0, Math.PI * 2);
    ctx.fillStyle = marker.positive ? '#2fbf4f' : '#e5484d';
    ctx.fill();
    ctx.strokeStyle = 'white';
    ctx.stroke();
  }
}

function render(): void {
  const s = session.state;

  el.banner.hidden = !s.banner;
  el.banner.textContent = s.banner ?? '';

  el.clips.replaceChildren(
    ...s.clips.map((clip) => {
      const li = document.createElement('li');
      const btn = document.createElement('button');
      const tally = Object.entries(clip.statuses)
        .map(([k, v]) => `${v} ${k}`)
        .join(', ');
      btn.textContent = `${clip.clip_id} (${clip.track_count} tracks${tally ? `: ${tally}` : ''})`;
      btn.classList.toggle('active', clip.clip_id === s.clipId);
      btn.addEventListener('click', () => void session.openClip(clip.clip_id));
      li.appendChild(btn);
      return li;
    }),
  );

  el.tracks.replaceChildren(
    ...(s.listing?.tracks ?? []).map((track, i) => {
      const li = document.createElement('li');
      const btn = document.createElement('button');
      const [r, g, b] = trackColor(track.track_id);
      const flagged = session.subGammaFrames(track).length;
      btn.innerHTML =
        `<span class="swatch" style="background: rgb(${r},${g},${b})"></span>` +
        `${track.track_id} <span class="status ${track.status}">${track.status}</span>` +
        (flagged ? ` <span class="flagged">${flagged} low</span>` : '');
      btn.classList.toggle('active', i === s.trackIndex);
      btn.addEventListener('click', () => void session.selectTrack(i));
      li.appendChild(btn);
      return li;
    }),
  );

  const track = session.selectedTrack();
  const url = session.frameUrl();
  if (url && el.frame.src !== url) el.frame.src = url;
  el.frame.hidden = !url;
  el.frameLabel.textContent = track
    ? `frame ${s.frame} / ${track.start_frame + track.length - 1}`
    : 'no track selected';

  el.steps.replaceChildren(
    ...(track?.step_ious ?? []).map((value, i) => {
      const frame = track!.start_frame + i;
      const span = document.createElement('span');
      span.className = 'step';
      if (value === null) span.classList.add('seed');
      else if (value <= session.gamma) span.classList.add('low');
      else span.classList.add('ok');
      span.title = value === null ? `frame ${frame}: seed` : `frame ${frame}: step ${value.toFixed(3)}`;
      span.classList.toggle('current', frame === s.frame);
      span.addEventListener('click', () => session.gotoFrame(frame));
      return span;
    }),
  );

  const positives = s.prompts.filter((p) => p.label === 'pos').length;
  el.promptCount.textContent = s.prompts.length
    ? `${positives} positive, ${s.prompts.length - positives} negative`
    : 'no clicks yet';
  el.commit.disabled = !session.canCommit;

  el.candidates.replaceChildren(
    ...s.candidates.map((candidate, i) => {
      const li = document.createElement('li');
      const label = document.createElement('label');
      const radio = document.createElement('input');
      radio.type = 'radio';
      radio.name = 'candidate';
      radio.checked = s.chosen === i;
      radio.addEventListener('change', () => session.chooseCandidate(i));
      label.appendChild(radio);
      label.appendChild(document.createTextNode(` #${i + 1}: ${formatCandidate(candidate)}`));
      li.appendChild(label);
      return li;
    }),
  );

  drawOverlay();
}

session.subscribe(render);
render();
void session.loadClips();
