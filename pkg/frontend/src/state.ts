/** Scenario history and submission queue.
 *
 * History lives in browser memory only; the service is stateless, so the
 * audit trail is exported as JSON on demand. Submissions are serialized:
 * one request in flight, later ones queue in order.
 */

import type { Client } from "./api.js";
import type { StressRequestBody, StressResponsePayload } from "./types.js";

export interface HistoryEntry {
  seq: number;
  request: StressRequestBody;
  response: StressResponsePayload;
}

export class ScenarioHistory {
  private seq = 0;
  private tail: Promise<unknown> = Promise.resolve();
  readonly entries: HistoryEntry[] = [];
  readonly selected = new Set<number>();

  /** Queue a stress run; resolves with the appended entry. The response is
   * stored verbatim, so every number in history is exactly what the API
   * returned. Failures reject the caller's promise but leave the queue
   * usable. */
  submit(client: Client, request: StressRequestBody): Promise<HistoryEntry> {
    const run = this.tail.then(async () => {
      const response = await client.postStress(request);
      const entry: HistoryEntry = {
        seq: ++this.seq,
        request: JSON.parse(JSON.stringify(request)) as StressRequestBody,
        response,
      };
      this.entries.push(entry);
      return entry;
    });
    this.tail = run.catch(() => undefined);
    return run;
  }

  toggleSelected(seq: number): void {
    if (this.selected.has(seq)) {
      this.selected.delete(seq);
    } else {
      this.selected.add(seq);
    }
  }

  /** Entries picked for side-by-side comparison, in submission order. */
  comparison(): HistoryEntry[] {
    return this.entries.filter((e) => this.selected.has(e.seq));
  }

  /** Full audit export; parses back to the exact response doubles. */
  exportJson(): string {
    return JSON.stringify({ entries: this.entries }, null, 2);
  }
}
