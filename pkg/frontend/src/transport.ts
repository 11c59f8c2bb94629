/** WebSocket plumbing with automatic reconnect and outbox flushing. */
import { Message } from "./protocol.js";

export interface Transport {
  send(message: Message): void;
  close(): void;
}

export interface TransportHooks {
  onMessage(raw: unknown): void;
  onStatus(status: "disconnected" | "connecting" | "connected"): void;
}

export function connect(url: string, hooks: TransportHooks,
                        reconnectMs = 1500): Transport {
  let socket: WebSocket | null = null;
  let closed = false;
  const queue: Message[] = [];

  function open(): void {
    if (closed) return;
    hooks.onStatus("connecting");
    socket = new WebSocket(url);
    socket.onopen = () => {
      hooks.onStatus("connected");
      while (queue.length && socket && socket.readyState === WebSocket.OPEN) {
        socket.send(JSON.stringify(queue.shift()));
      }
    };
    socket.onmessage = (event) => {
      try {
        hooks.onMessage(JSON.parse(event.data));
      } catch {
        hooks.onMessage(null);
      }
    };
    socket.onclose = () => {
      hooks.onStatus("disconnected");
      if (!closed) setTimeout(open, reconnectMs);
    };
    socket.onerror = () => socket?.close();
  }

  open();
  return {
    send(message: Message): void {
      if (socket && socket.readyState === WebSocket.OPEN) {
        socket.send(JSON.stringify(message));
      } else {
        queue.push(message);
      }
    },
    close(): void {
      closed = true;
      socket?.close();
    },
  };
}
