// WebSocket transport: one socket, reconnect with backoff, events
// delivered in arrival order.

import { Command, encodeCommand, ServerEvent } from "./protocol.js";

export interface SocketHandlers {
  onEvent(event: ServerEvent): void;
  onOpen(): void;
  onClose(detail: string): void;
}

export class PanelSocket {
  private ws: WebSocket | null = null;
  private reconnectDelay = 500;
  private readonly maxReconnectDelay = 10_000;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly handlers: SocketHandlers,
  ) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.reconnectDelay = 500;
      this.handlers.onOpen();
    };
    this.ws.onmessage = (message: MessageEvent) => {
      let event: ServerEvent;
      try {
        event = JSON.parse(String(message.data)) as ServerEvent;
      } catch (error) {
        this.handlers.onClose(`unparseable server message: ${error}`);
        return;
      }
      this.handlers.onEvent(event);
    };
    this.ws.onclose = () => {
      this.ws = null;
      if (this.closed) {
        return;
      }
      this.handlers.onClose("socket closed");
      setTimeout(() => {
        this.reconnectDelay = Math.min(
          this.reconnectDelay * 2,
          this.maxReconnectDelay,
        );
        if (!this.closed) {
          this.connect();
        }
      }, this.reconnectDelay);
    };
  }

  isOpen(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(command: Command): void {
    if (this.isOpen()) {
      this.ws!.send(encodeCommand(command));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
