// HTTP + SSE client for the session service. No other network access.

import { STREAM_EVENT_TYPES, type ConnectionStatus, type MapDocument, type StreamEvent } from "./types.js";

async function jsonFetch<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let message = `${response.status}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      message = `${body.code ?? response.status}: ${body.message ?? ""}`;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new Error(message);
  }
  return (await response.json()) as T;
}

export async function fetchMapDoc(base: string, mapId: string): Promise<MapDocument> {
  return jsonFetch<MapDocument>(`${base}/api/v1/maps/${mapId}`);
}

export async function listMaps(base: string): Promise<string[]> {
  return jsonFetch<string[]>(`${base}/api/v1/maps`);
}

export async function createSession(
  base: string,
  body: Record<string, unknown>,
): Promise<string> {
  const result = await jsonFetch<{ session_id: string }>(`${base}/api/v1/sessions`, {
    method: "POST",
    body: JSON.stringify(body),
  });
  return result.session_id;
}

export interface SessionApi {
  postQuery(utterance: string): Promise<void>;
  postDecision(promptId: string, choice: "proceed" | "reroute"): Promise<void>;
}

export class HttpSessionApi implements SessionApi {
  constructor(
    private readonly base: string,
    private readonly sessionId: string,
  ) {}

  async postQuery(utterance: string): Promise<void> {
    await jsonFetch(`${this.base}/api/v1/sessions/${this.sessionId}/query`, {
      method: "POST",
      body: JSON.stringify({ utterance }),
    });
  }

  async postDecision(promptId: string, choice: "proceed" | "reroute"): Promise<void> {
    await jsonFetch(`${this.base}/api/v1/sessions/${this.sessionId}/decision`, {
      method: "POST",
      body: JSON.stringify({ prompt_id: promptId, choice }),
    });
  }
}

export interface StreamHandlers {
  onEvent(event: StreamEvent): void;
  onStatus(status: ConnectionStatus): void;
}

// Server-sent events with `?after=<seq>` resume: on error the source is
// reopened from the last seen sequence number, so reconnects replay the log
// without gaps or duplicates.
export function openStream(base: string, sessionId: string, handlers: StreamHandlers): () => void {
  let lastSeq = 0;
  let closed = false;
  let source: EventSource | null = null;
  let retry: ReturnType<typeof setTimeout> | null = null;

  const connect = () => {
    if (closed) return;
    source = new EventSource(`${base}/api/v1/sessions/${sessionId}/events?after=${lastSeq}`);
    source.onopen = () => handlers.onStatus("live");
    source.onerror = () => {
      source?.close();
      if (closed) return;
      handlers.onStatus("reconnecting");
      retry = setTimeout(connect, 1000);
    };
    for (const type of STREAM_EVENT_TYPES) {
      source.addEventListener(type, (raw) => {
        const message = raw as MessageEvent<string>;
        const seq = Number(message.lastEventId);
        if (!Number.isFinite(seq) || seq <= lastSeq) return;
        lastSeq = seq;
        handlers.onEvent({ seq, type, data: JSON.parse(message.data) });
      });
    }
  };

  handlers.onStatus("connecting");
  connect();
  return () => {
    closed = true;
    if (retry) clearTimeout(retry);
    source?.close();
    handlers.onStatus("closed");
  };
}
