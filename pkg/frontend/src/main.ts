/** Browser bootstrap: join form, message box, and the render loop. */

import { RoomClient } from "./client.js";
import { render } from "./view.js";

function requireElement<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function join(serverUrl: string, roomId: string, userId: string): Promise<void> {
  const base = serverUrl.replace(/\/$/, "");
  // Create the room if needed and register membership over REST, then
  // attach the websocket.
  await fetch(`${base}/rooms`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ room_id: roomId }),
  }).catch(() => undefined);
  await fetch(`${base}/rooms/${encodeURIComponent(roomId)}/members`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ user_id: userId }),
  });

  const wsUrl = base.replace(/^http/, "ws") + "/ws";
  const client = new RoomClient(wsUrl, roomId, userId, (url) => new WebSocket(url));
  client.openLink = (link) => window.open(link, "_blank", "noopener");

  const chatRoot = requireElement<HTMLDivElement>("chat");
  const handlers = {
    onPrev: () => client.prev(),
    onNext: () => client.next(),
    onClick: (rank: number) => client.click(rank),
    onReply: (text: string) => client.reply(text),
  };
  client.onChange = (state) => render(chatRoot, state, handlers);

  await client.connect();

  const input = requireElement<HTMLInputElement>("message-input");
  const send = requireElement<HTMLButtonElement>("message-send");
  const post = () => {
    if (input.value.trim()) {
      client.post(input.value);
      input.value = "";
    }
  };
  send.addEventListener("click", post);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") post();
  });
  requireElement<HTMLDivElement>("join-panel").hidden = true;
  requireElement<HTMLDivElement>("chat-panel").hidden = false;
}

function main(): void {
  const form = requireElement<HTMLFormElement>("join-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const server = requireElement<HTMLInputElement>("server-url").value;
    const room = requireElement<HTMLInputElement>("room-id").value;
    const user = requireElement<HTMLInputElement>("user-id").value;
    join(server, room, user).catch((error) => {
      requireElement<HTMLDivElement>("join-error").textContent = String(error);
    });
  });
}

main();
