// One WebSocket multiplexing every stream topic, with automatic reconnect.
// Consumers get events on the rendering thread via the handler callback.

import type { Session } from "./api.js";
import { wsEventsUrl } from "./api.js";
import type { StreamEvent, StreamTopic } from "./types.js";

const ALL_TOPICS: StreamTopic[] = ["agent_state", "sensors", "mission_state", "map"];

export class EventStream {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 1000;

  constructor(
    private session: Session,
    private onEvent: (event: StreamEvent) => void,
    private onStatus: (connected: boolean) => void,
    private topics: StreamTopic[] = ALL_TOPICS,
  ) {}

  connect(): void {
    const ws = new WebSocket(wsEventsUrl(this.session));
    this.ws = ws;
    ws.onopen = () => {
      ws.send(JSON.stringify({ token: this.session.token, topics: this.topics }));
      this.retryMs = 1000;
      this.onStatus(true);
    };
    ws.onmessage = (msg) => {
      try {
        this.onEvent(JSON.parse(msg.data) as StreamEvent);
      } catch {
        // a malformed push is a server bug; skip it rather than dying
      }
    };
    ws.onclose = () => {
      this.onStatus(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 15_000);
      }
    };
    ws.onerror = () => ws.close();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
