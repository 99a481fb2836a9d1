// Incremental splitter for line-delimited JSON streams. Network chunks arrive
// cut at arbitrary byte offsets; this buffers partial lines and emits only
// complete ones, in order.

export class NdjsonSplitter {
  private buffer = '';

  /** Feed one chunk; returns the complete lines it finished. */
  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split('\n');
    this.buffer = parts.pop() ?? '';
    return parts.filter((line) => line.trim().length > 0);
  }

  /** Flush a trailing unterminated line at end of stream. */
  end(): string[] {
    const rest = this.buffer.trim();
    this.buffer = '';
    return rest.length > 0 ? [rest] : [];
  }
}

export function parseLines(lines: string[]): unknown[] {
  return lines.map((line) => JSON.parse(line));
}
