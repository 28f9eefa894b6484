import { ServiceClient } from './api';
import { PreviewScheduler } from './preview';
import { EditorState } from './state';
import { ATTRIBUTE_NAMES, ServiceError } from './types';

const serviceUrl =
  new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8765';

const client = new ServiceClient(serviceUrl);
const state = new EditorState();

const el = {
  upload: document.getElementById('upload') as HTMLInputElement,
  preview: document.getElementById('preview') as HTMLImageElement,
  neutral: document.getElementById('neutral') as HTMLImageElement,
  sliders: document.getElementById('sliders') as HTMLDivElement,
  status: document.getElementById('status') as HTMLDivElement,
  trackCsv: document.getElementById('track-csv') as HTMLInputElement,
  playBtn: document.getElementById('play') as HTMLButtonElement,
  seek: document.getElementById('seek') as HTMLInputElement,
  resetBtn: document.getElementById('reset') as HTMLButtonElement,
  exportBtn: document.getElementById('export') as HTMLButtonElement,
  modelInfo: document.getElementById('model-info') as HTMLDivElement,
};

function setStatus(text: string): void {
  el.status.textContent = text;
}

const scheduler = new PreviewScheduler(
  async (attrs) => {
    if (!state.sessionId) throw new ServiceError(0, 'no_session', 'upload a source first');
    const result = await client.reenact(state.sessionId, attrs);
    if (result.clamped) setStatus('some values were clamped to [0, 1]');
    return result.image;
  },
  {
    onImage: (image) => {
      el.preview.src = `data:image/png;base64,${image}`;
    },
    onError: (err) => {
      setStatus(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
    },
  },
);

const sliderInputs: HTMLInputElement[] = [];

function buildSliders(): void {
  ATTRIBUTE_NAMES.forEach((name, i) => {
    const row = document.createElement('div');
    row.className = 'slider-row';
    const label = document.createElement('label');
    label.textContent = name;
    const input = document.createElement('input');
    input.type = 'range';
    input.min = '0';
    input.max = '1';
    input.step = '0.01';
    input.value = String(state.attributes[i]);
    input.addEventListener('input', () => {
      state.setAttribute(i, Number(input.value));
      scheduler.request(state.attributes);
    });
    const pin = document.createElement('input');
    pin.type = 'checkbox';
    pin.title = 'pin during playback';
    pin.addEventListener('change', () => {
      state.setOverride(i, pin.checked ? Number(input.value) : null);
    });
    row.append(label, input, pin);
    el.sliders.append(row);
    sliderInputs.push(input);
  });
}

function syncSliders(): void {
  const attrs = state.attributes;
  sliderInputs.forEach((input, i) => {
    input.value = String(attrs[i]);
  });
}

el.upload.addEventListener('change', async () => {
  const file = el.upload.files?.[0];
  if (!file) return;
  setStatus('uploading…');
  try {
    const session = await client.createSession(file);
    scheduler.reset();
    state.sessionId = session.sessionId;
    el.neutral.src = `data:image/png;base64,${session.neutralPreview}`;
    setStatus('session ready');
    scheduler.request(state.attributes);
  } catch (err) {
    setStatus(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
  }
});

el.trackCsv.addEventListener('change', async () => {
  const file = el.trackCsv.files?.[0];
  if (!file) return;
  try {
    const frames = await client.importTrack(await file.text());
    state.loadTrack(frames);
    el.seek.max = String(frames.length - 1);
    el.seek.value = '0';
    syncSliders();
    setStatus(`track loaded: ${frames.length} frames`);
    scheduler.request(state.attributes);
  } catch (err) {
    setStatus(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
  }
});

let playTimer: number | null = null;

el.playBtn.addEventListener('click', () => {
  if (playTimer !== null) {
    window.clearInterval(playTimer);
    playTimer = null;
    el.playBtn.textContent = 'Play';
    return;
  }
  el.playBtn.textContent = 'Pause';
  playTimer = window.setInterval(() => {
    if (!state.step()) {
      window.clearInterval(playTimer!);
      playTimer = null;
      el.playBtn.textContent = 'Play';
      return;
    }
    el.seek.value = String(state.trackPosition);
    syncSliders();
    scheduler.request(state.attributes);
  }, 150);
});

el.seek.addEventListener('input', () => {
  state.seek(Number(el.seek.value));
  syncSliders();
  scheduler.request(state.attributes);
});

el.resetBtn.addEventListener('click', () => {
  state.resetNeutral();
  syncSliders();
  scheduler.request(state.attributes);
});

el.exportBtn.addEventListener('click', () => {
  // Current preview as a downloadable PNG.
  if (!el.preview.src.startsWith('data:image/png')) return;
  const a = document.createElement('a');
  a.href = el.preview.src;
  a.download = 'reenacted.png';
  a.click();
});

buildSliders();
client
  .modelInfo()
  .then((info) => {
    el.modelInfo.textContent =
      `${info.preset} @ ${info.resolution}px, ${info.trainedSteps} steps, ` +
      `ckpt ${info.checkpointHash.slice(0, 12)}`;
  })
  .catch(() => setStatus('service unreachable — is it running?'));
