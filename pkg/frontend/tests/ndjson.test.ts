import { describe, expect, it } from 'vitest';
import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { NdjsonSplitter } from '../src/ndjson.js';

const FIXTURE = readFileSync(join(__dirname, 'fixtures', 'replan_trace.jsonl'), 'utf-8');
const LINES = FIXTURE.split('\n').filter((l) => l.trim().length > 0);

function mulberry(seed: number): () => number {
  let a = seed;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe('NdjsonSplitter', () => {
  it('recovers every line regardless of chunk boundaries', () => {
    for (let seed = 1; seed <= 25; seed++) {
      const rand = mulberry(seed);
      const splitter = new NdjsonSplitter();
      const out: string[] = [];
      let rest = FIXTURE;
      while (rest.length > 0) {
        const n = Math.max(1, Math.floor(rand() * 37));
        out.push(...splitter.push(rest.slice(0, n)));
        rest = rest.slice(n);
      }
      out.push(...splitter.end());
      expect(out).toEqual(LINES);
    }
  });

  it('flushes an unterminated trailing line on end()', () => {
    const splitter = new NdjsonSplitter();
    expect(splitter.push('{"a":1}\n{"b"')).toEqual(['{"a":1}']);
    expect(splitter.end()).toEqual(['{"b"']);
    expect(splitter.end()).toEqual([]);
  });

  it('ignores blank keep-alive lines', () => {
    const splitter = new NdjsonSplitter();
    expect(splitter.push('\n\n{"a":1}\n\n')).toEqual(['{"a":1}']);
  });
});
