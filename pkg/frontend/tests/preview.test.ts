import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { PreviewScheduler } from '../src/preview';

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe('PreviewScheduler', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  const flushMicrotasks = () => vi.advanceTimersByTimeAsync(0);

  it('debounces a burst into one request with the last vector', async () => {
    const render = vi.fn().mockResolvedValue('img');
    const onImage = vi.fn();
    const s = new PreviewScheduler(render, { onImage }, 100);
    for (let v = 0; v <= 5; v++) s.request([v]);
    expect(render).not.toHaveBeenCalled();
    await vi.advanceTimersByTimeAsync(100);
    expect(render).toHaveBeenCalledTimes(1);
    expect(render).toHaveBeenCalledWith([5]);
    expect(onImage).toHaveBeenCalledWith('img');
  });

  it('keeps at most one request in flight and follows up with the newest', async () => {
    const first = deferred<string>();
    const second = deferred<string>();
    const render = vi
      .fn()
      .mockReturnValueOnce(first.promise)
      .mockReturnValueOnce(second.promise);
    const onImage = vi.fn();
    const s = new PreviewScheduler(render, { onImage }, 10);

    s.request([1]);
    await vi.advanceTimersByTimeAsync(10);
    expect(s.busy).toBe(true);

    // Three updates while busy: only the last survives.
    s.request([2]);
    await vi.advanceTimersByTimeAsync(10);
    s.request([3]);
    await vi.advanceTimersByTimeAsync(10);
    s.request([4]);
    await vi.advanceTimersByTimeAsync(10);
    expect(render).toHaveBeenCalledTimes(1);

    first.resolve('a');
    await flushMicrotasks();
    expect(onImage).toHaveBeenCalledWith('a');
    expect(render).toHaveBeenCalledTimes(2);
    expect(render).toHaveBeenLastCalledWith([4]);

    second.resolve('b');
    await flushMicrotasks();
    expect(onImage).toHaveBeenLastCalledWith('b');
    expect(s.busy).toBe(false);
  });

  it('routes failures to onError and keeps working afterwards', async () => {
    const render = vi
      .fn()
      .mockRejectedValueOnce(new Error('boom'))
      .mockResolvedValueOnce('ok');
    const onImage = vi.fn();
    const onError = vi.fn();
    const s = new PreviewScheduler(render, { onImage, onError }, 10);

    s.request([1]);
    await vi.advanceTimersByTimeAsync(10);
    expect(onError).toHaveBeenCalledTimes(1);
    expect(onImage).not.toHaveBeenCalled();

    s.request([2]);
    await vi.advanceTimersByTimeAsync(10);
    expect(onImage).toHaveBeenCalledWith('ok');
  });

  it('reset discards pending work and in-flight results', async () => {
    const first = deferred<string>();
    const render = vi.fn().mockReturnValueOnce(first.promise).mockResolvedValue('new');
    const onImage = vi.fn();
    const s = new PreviewScheduler(render, { onImage }, 10);

    s.request([1]);
    await vi.advanceTimersByTimeAsync(10);
    s.reset(); // e.g. the user uploaded a new source

    first.resolve('stale');
    await flushMicrotasks();
    expect(onImage).not.toHaveBeenCalled(); // stale image dropped

    s.request([2]);
    await vi.advanceTimersByTimeAsync(10);
    expect(onImage).toHaveBeenCalledWith('new');
  });

  it('copies the vector so later caller mutation cannot race', async () => {
    const render = vi.fn().mockResolvedValue('img');
    const s = new PreviewScheduler(render, { onImage: () => {} }, 10);
    const attrs = [1, 2, 3];
    s.request(attrs);
    attrs[0] = 99;
    await vi.advanceTimersByTimeAsync(10);
    expect(render).toHaveBeenCalledWith([1, 2, 3]);
  });
});
