/** DOM rendering: state in, elements out. All mutations flow through
 * `render`, driven by the client's onChange. */

import { parseMarkup } from "./citations.js";
import type { ClientState, ResultPageView } from "./state.js";

export interface ViewHandlers {
  onPrev(): void;
  onNext(): void;
  onClick(rank: number): void;
  onReply(text: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Rendered agent text: markup subset plus citation anchors that scroll to
 * and highlight the card with the matching rank. */
export function renderRichText(text: string): HTMLElement {
  const container = el("div", "rich-text");
  for (const line of text.split("\n")) {
    const paragraph = el("p");
    for (const token of parseMarkup(line)) {
      if (token.kind === "text") {
        paragraph.appendChild(document.createTextNode(token.value));
      } else if (token.kind === "bold") {
        paragraph.appendChild(el("strong", undefined, token.value));
      } else if (token.kind === "link") {
        const anchor = el("a", "external", token.href);
        anchor.setAttribute("href", token.href);
        anchor.setAttribute("target", "_blank");
        anchor.setAttribute("rel", "noopener");
        paragraph.appendChild(anchor);
      } else {
        const anchor = el("a", "citation", `[${token.rank}]`);
        anchor.setAttribute("href", `#card-${token.rank}`);
        anchor.dataset.rank = String(token.rank);
        anchor.addEventListener("click", (event) => {
          event.preventDefault();
          const card = document.querySelector(`[data-card-rank="${token.rank}"]`);
          card?.scrollIntoView({ behavior: "smooth", block: "center" });
          card?.classList.add("highlight");
          setTimeout(() => card?.classList.remove("highlight"), 1200);
        });
        paragraph.appendChild(anchor);
      }
    }
    container.appendChild(paragraph);
  }
  return container;
}

function renderMessages(state: ClientState): HTMLElement {
  const list = el("div", "messages");
  for (const message of state.messages) {
    const row = el("div", `message ${message.isAgent ? "agent" : "user"} kind-${message.kind}`);
    row.appendChild(el("span", "author", message.authorId));
    if (message.kind === "answer" || message.kind === "question") {
      row.appendChild(renderRichText(message.text));
    } else {
      row.appendChild(el("span", "text", message.text));
    }
    if (message.llmOnly) {
      row.appendChild(el("span", "badge llm-only", "no web references"));
    }
    list.appendChild(row);
  }
  return list;
}

function renderCards(page: ResultPageView, handlers: ViewHandlers): HTMLElement {
  const block = el("section", "result-block");
  const header = el("div", "result-header", page.label);
  block.appendChild(header);

  for (const card of page.cards) {
    const cardNode = el("article", "card");
    cardNode.dataset.cardRank = String(card.rank);
    cardNode.appendChild(el("h3", "card-title", `${card.rank}. ${card.title}`));
    cardNode.appendChild(el("p", "card-reference", card.reference));
    const clickButton = el("button", "click-button", "Click");
    clickButton.addEventListener("click", () => handlers.onClick(card.rank));
    cardNode.appendChild(clickButton);
    block.appendChild(cardNode);
  }

  const nav = el("div", "nav");
  const prev = el("button", "prev", "Previous");
  prev.disabled = !page.prevEnabled;
  prev.addEventListener("click", () => handlers.onPrev());
  const next = el("button", "next", "Next");
  next.disabled = !page.nextEnabled;
  next.addEventListener("click", () => handlers.onNext());
  nav.append(prev, next);
  block.appendChild(nav);
  return block;
}

function renderPrompt(state: ClientState, handlers: ViewHandlers): HTMLElement {
  const box = el("div", "clarification");
  box.appendChild(el("p", "question", state.prompt?.question ?? ""));
  const input = el("input", "reply-input");
  input.setAttribute("placeholder", "Your answer...");
  const send = el("button", "reply-send", "Reply");
  send.addEventListener("click", () => {
    if (input.value.trim()) {
      handlers.onReply(input.value);
      input.value = "";
    }
  });
  box.append(input, send);
  return box;
}

export function render(root: HTMLElement, state: ClientState, handlers: ViewHandlers): void {
  root.replaceChildren();
  root.appendChild(renderMessages(state));
  if (state.prompt) root.appendChild(renderPrompt(state, handlers));
  if (state.resultPage && state.resultPage.totalCards > 0) {
    root.appendChild(renderCards(state.resultPage, handlers));
  }
  if (state.lastError) root.appendChild(el("div", "error-bar", state.lastError));
}
