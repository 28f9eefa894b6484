import { describe, expect, it, vi } from 'vitest';

import { ServiceClient } from '../src/api';
import { ServiceError } from '../src/types';

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('ServiceClient', () => {
  it('creates a session and maps snake_case fields', async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      jsonResponse(201, { session_id: 'abc', neutral_preview: 'cGc=' }),
    );
    const client = new ServiceClient('http://host:1/', fetchFn);
    const session = await client.createSession(new ArrayBuffer(4));
    expect(session).toEqual({ sessionId: 'abc', neutralPreview: 'cGc=' });
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe('http://host:1/sessions'); // trailing slash stripped
    expect(init.method).toBe('POST');
  });

  it('surfaces service error bodies as ServiceError', async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      jsonResponse(400, { code: 'undecodable_image', message: 'nope' }),
    );
    const client = new ServiceClient('http://host:1', fetchFn);
    const err = await client.createSession(new ArrayBuffer(1)).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(400);
    expect(err.code).toBe('undecodable_image');
    expect(err.message).toBe('nope');
  });

  it('falls back to status text on a non-JSON error body', async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      new Response('<html>boom</html>', { status: 502, statusText: 'Bad Gateway' }),
    );
    const client = new ServiceClient('http://host:1', fetchFn);
    const err = await client.modelInfo().catch((e) => e);
    expect(err.code).toBe('unknown');
    expect(err.message).toBe('Bad Gateway');
  });

  it('posts the attribute vector and decodes the result', async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      jsonResponse(200, { image: 'aW1n', clamped: true }),
    );
    const client = new ServiceClient('http://host:1', fetchFn);
    const attrs = new Array(20).fill(0.5);
    const result = await client.reenact('sid', attrs);
    expect(result).toEqual({ image: 'aW1n', clamped: true });
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe('http://host:1/sessions/sid/reenact');
    expect(JSON.parse(init.body)).toEqual({ attributes: attrs });
  });

  it('rejects a wrong-length vector before any network call', async () => {
    const fetchFn = vi.fn();
    const client = new ServiceClient('http://host:1', fetchFn);
    const err = await client.reenact('sid', [0.5]).catch((e) => e);
    expect(err.code).toBe('attribute_count');
    expect(fetchFn).not.toHaveBeenCalled();
  });

  it('imports a CSV track', async () => {
    const frames = [new Array(20).fill(0), new Array(20).fill(1)];
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse(200, { frames }));
    const client = new ServiceClient('http://host:1', fetchFn);
    expect(await client.importTrack('frame,...')).toEqual(frames);
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe('http://host:1/attributes/import');
    expect(init.body).toBe('frame,...');
  });

  it('maps model info', async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      jsonResponse(200, {
        checkpoint_hash: 'deadbeef',
        resolution: 64,
        preset: 'desk',
        lambdas: { lambda1: 10, lambda2: 1, lambda3: 10 },
        trained_steps: 3000,
      }),
    );
    const client = new ServiceClient('http://host:1', fetchFn);
    expect(await client.modelInfo()).toEqual({
      checkpointHash: 'deadbeef',
      resolution: 64,
      preset: 'desk',
      trainedSteps: 3000,
    });
  });
});
