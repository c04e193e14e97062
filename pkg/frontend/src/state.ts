/** Client state as a pure projection of the ordered server event stream.
 *
 * `reduce` is the only way state changes, so reconnecting and replaying
 * history necessarily reproduces the same view. No DOM in here.
 */

import type { ReferenceCard, ServerEvent, Utterance } from "./protocol.js";

export type MessageKind = "plain" | "answer" | "question" | "error";

export interface ChatMessage {
  id: string;
  authorId: string;
  text: string;
  timestamp: number;
  isAgent: boolean;
  kind: MessageKind;
  pipelineId?: string;
  llmOnly?: boolean;
}

export interface ResultPageView {
  pipelineId: string;
  cards: ReferenceCard[];
  pageIndex: number;
  pageCount: number;
  totalCards: number;
  prevEnabled: boolean;
  nextEnabled: boolean;
  label: string;
}

export interface ClarificationPrompt {
  pipelineId: string;
  question: string;
}

export interface ClientState {
  roomId: string | null;
  messages: ChatMessage[];
  resultPage: ResultPageView | null;
  prompt: ClarificationPrompt | null;
  lastError: string | null;
}

export const initialState: ClientState = {
  roomId: null,
  messages: [],
  resultPage: null,
  prompt: null,
  lastError: null,
};

function fromUtterance(utterance: Utterance, kind: MessageKind = "plain"): ChatMessage {
  return {
    id: utterance.id,
    authorId: utterance.author_id,
    text: utterance.text,
    timestamp: utterance.timestamp,
    isAgent: utterance.is_agent,
    kind: utterance.is_agent && kind === "plain" ? "answer" : kind,
  };
}

function pageView(event: {
  pipeline_id: string;
  cards: ReferenceCard[];
  page_index: number;
  page_count: number;
  total_cards: number;
}): ResultPageView {
  return {
    pipelineId: event.pipeline_id,
    cards: event.cards,
    pageIndex: event.page_index,
    pageCount: event.page_count,
    totalCards: event.total_cards,
    prevEnabled: event.page_index > 0,
    nextEnabled: event.page_index < event.page_count - 1,
    label: `Page ${event.page_index + 1} of ${event.page_count}`,
  };
}

export function reduce(state: ClientState, event: ServerEvent): ClientState {
  switch (event.type) {
    case "history":
      // Full replay on (re)connect: history alone rebuilds the message
      // list; the active result page follows as its own event.
      return {
        ...initialState,
        roomId: event.room_id,
        messages: event.utterances.map((u) => fromUtterance(u)),
      };
    case "message":
      return { ...state, messages: [...state.messages, fromUtterance(event.utterance)] };
    case "agent_answer": {
      const message: ChatMessage = {
        ...fromUtterance(event.utterance, "answer"),
        pipelineId: event.pipeline_id,
        llmOnly: event.llm_only,
      };
      const prompt =
        state.prompt && state.prompt.pipelineId === event.pipeline_id ? null : state.prompt;
      return { ...state, messages: [...state.messages, message], prompt };
    }
    case "clarifying_question":
      return {
        ...state,
        messages: [
          ...state.messages,
          { ...fromUtterance(event.utterance, "question"), pipelineId: event.pipeline_id },
        ],
        prompt: { pipelineId: event.pipeline_id, question: event.text },
      };
    case "result_page": {
      // A stale page for a pipeline older than the one on screen is
      // ignored; pipeline ids are monotonically increasing strings.
      const current = state.resultPage;
      if (current && event.pipeline_id < current.pipelineId) return state;
      return { ...state, resultPage: pageView(event) };
    }
    case "click_result":
      return state;
    case "error": {
      const next: ClientState = { ...state, lastError: `${event.code}: ${event.text}` };
      if (event.utterance) {
        next.messages = [...state.messages, fromUtterance(event.utterance, "error")];
        if (state.prompt && event.pipeline_id === state.prompt.pipelineId) next.prompt = null;
      }
      return next;
    }
  }
}

export function reduceAll(state: ClientState, events: ServerEvent[]): ClientState {
  return events.reduce(reduce, state);
}
