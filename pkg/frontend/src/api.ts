import {
  ModelInfo,
  NUM_ATTRIBUTES,
  ReenactResult,
  ServiceError,
  SessionInfo,
} from './types';

type FetchLike = typeof fetch;

async function readError(resp: Response): Promise<ServiceError> {
  let code = 'unknown';
  let message = resp.statusText;
  try {
    const doc = await resp.json();
    if (doc && typeof doc.code === 'string') code = doc.code;
    if (doc && typeof doc.message === 'string') message = doc.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ServiceError(resp.status, code, message);
}

export class ServiceClient {
  private base: string;

  constructor(baseUrl: string, private fetchFn: FetchLike = fetch) {
    this.base = baseUrl.replace(/\/$/, '');
  }

  async createSession(imageBytes: Blob | ArrayBuffer): Promise<SessionInfo> {
    const resp = await this.fetchFn(`${this.base}/sessions`, {
      method: 'POST',
      body: imageBytes,
    });
    if (!resp.ok) throw await readError(resp);
    const doc = await resp.json();
    return { sessionId: doc.session_id, neutralPreview: doc.neutral_preview };
  }

  async reenact(sessionId: string, attributes: number[]): Promise<ReenactResult> {
    if (attributes.length !== NUM_ATTRIBUTES) {
      throw new ServiceError(0, 'attribute_count', `expected ${NUM_ATTRIBUTES} values`);
    }
    const resp = await this.fetchFn(
      `${this.base}/sessions/${encodeURIComponent(sessionId)}/reenact`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ attributes }),
      },
    );
    if (!resp.ok) throw await readError(resp);
    const doc = await resp.json();
    return { image: doc.image, clamped: !!doc.clamped };
  }

  /** Import an attribute CSV; resolves to one 20-vector per frame. */
  async importTrack(csvText: string): Promise<number[][]> {
    const resp = await this.fetchFn(`${this.base}/attributes/import`, {
      method: 'POST',
      headers: { 'Content-Type': 'text/csv' },
      body: csvText,
    });
    if (!resp.ok) throw await readError(resp);
    const doc = await resp.json();
    return doc.frames;
  }

  async modelInfo(): Promise<ModelInfo> {
    const resp = await this.fetchFn(`${this.base}/model/info`);
    if (!resp.ok) throw await readError(resp);
    const doc = await resp.json();
    return {
      checkpointHash: doc.checkpoint_hash,
      resolution: doc.resolution,
      preset: doc.preset,
      trainedSteps: doc.trained_steps,
    };
  }
}
