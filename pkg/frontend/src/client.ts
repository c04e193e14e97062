/** Room client: one websocket, frames out, reduced state in.
 *
 * Navigation and click methods send exactly one frame per enabled press
 * and nothing for disabled ones; clicked links are opened only after the
 * server acknowledges the click (log-before-navigate).
 */

import type { ClientFrame, ServerEvent } from "./protocol.js";
import { type ClientState, initialState, reduce } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  // Handler slots typed loosely so both the DOM WebSocket and the ws
  // package satisfy the shape.
  onopen: ((event: any) => void) | null;
  onmessage: ((event: any) => void) | null;
  onclose: ((event: any) => void) | null;
  onerror: ((event: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

type Waiter = {
  matches: (event: ServerEvent) => boolean;
  resolve: (event: ServerEvent) => void;
};

export class RoomClient {
  state: ClientState = initialState;
  onChange: (state: ClientState) => void = () => {};
  openLink: (link: string) => void = () => {};

  private socket: SocketLike | null = null;
  private waiters: Waiter[] = [];

  constructor(
    private readonly url: string,
    private readonly roomId: string,
    private readonly userId: string,
    private readonly factory: SocketFactory,
  ) {}

  /** Open the socket, join, and resolve once history has been replayed. */
  connect(): Promise<ClientState> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.onerror = (event) => reject(new Error(`socket error: ${String(event)}`));
      socket.onclose = () => {
        this.socket = null;
      };
      socket.onopen = () => {
        this.send({ type: "join", room_id: this.roomId, user_id: this.userId });
      };
      socket.onmessage = (message) => {
        const event = JSON.parse(String(message.data)) as ServerEvent;
        this.dispatch(event);
        if (event.type === "history") resolve(this.state);
      };
    });
  }

  close(): void {
    this.socket?.close();
  }

  private dispatch(event: ServerEvent): void {
    if (event.type === "click_result") this.openLink(event.link);
    this.state = reduce(this.state, event);
    this.onChange(this.state);
    this.waiters = this.waiters.filter((waiter) => {
      if (!waiter.matches(event)) return true;
      waiter.resolve(event);
      return false;
    });
  }

  /** Resolve with the next event matching the predicate (test helper and
   * the hook for UI effects such as scroll-on-answer). */
  nextEvent<T extends ServerEvent>(
    matches: (event: ServerEvent) => event is T,
    timeoutMs = 10_000,
  ): Promise<T> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out waiting for event")), timeoutMs);
      this.waiters.push({
        matches,
        resolve: (event) => {
          clearTimeout(timer);
          resolve(event as T);
        },
      });
    });
  }

  private send(frame: ClientFrame): void {
    if (!this.socket) throw new Error("not connected");
    this.socket.send(JSON.stringify(frame));
  }

  post(text: string): void {
    this.send({ type: "post_message", text });
  }

  /** Reply to the pending clarifying question. */
  reply(text: string): void {
    this.send({ type: "clarification_reply", text });
  }

  /** One frame per enabled press; a disabled control sends nothing. */
  next(): boolean {
    if (!this.state.resultPage?.nextEnabled) return false;
    this.send({ type: "page_nav", direction: "next" });
    return true;
  }

  prev(): boolean {
    if (!this.state.resultPage?.prevEnabled) return false;
    this.send({ type: "page_nav", direction: "prev" });
    return true;
  }

  click(rank: number): boolean {
    const page = this.state.resultPage;
    if (!page || rank < 1 || rank > page.totalCards) return false;
    this.send({ type: "click", rank });
    return true;
  }
}
