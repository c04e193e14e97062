/** Wire protocol types, mirroring docs/wire-protocol.md field for field. */

export interface Utterance {
  id: string;
  room_id: string;
  author_id: string;
  text: string;
  timestamp: number;
  is_agent: boolean;
}

export interface ReferenceCard {
  rank: number;
  title: string;
  link: string;
  reference: string;
  source_rank: number;
}

export interface HistoryEvent {
  type: "history";
  room_id: string;
  utterances: Utterance[];
}

export interface MessageEvent {
  type: "message";
  utterance: Utterance;
}

export interface AgentAnswerEvent {
  type: "agent_answer";
  room_id: string;
  pipeline_id: string;
  text: string;
  llm_only: boolean;
  reference_count: number;
  utterance: Utterance;
}

export interface ClarifyingQuestionEvent {
  type: "clarifying_question";
  room_id: string;
  pipeline_id: string;
  text: string;
  utterance: Utterance;
}

export interface ResultPageEvent {
  type: "result_page";
  room_id: string;
  pipeline_id: string;
  cards: ReferenceCard[];
  page_index: number;
  page_count: number;
  total_cards: number;
}

export interface ClickResultEvent {
  type: "click_result";
  rank: number;
  link: string;
}

export interface ErrorEvent {
  type: "error";
  code: string;
  text: string;
  pipeline_id?: string;
  utterance?: Utterance;
}

export type ServerEvent =
  | HistoryEvent
  | MessageEvent
  | AgentAnswerEvent
  | ClarifyingQuestionEvent
  | ResultPageEvent
  | ClickResultEvent
  | ErrorEvent;

export type ClientFrame =
  | { type: "join"; room_id: string; user_id: string }
  | { type: "post_message"; text: string }
  | { type: "clarification_reply"; text: string }
  | { type: "page_nav"; direction: "next" | "prev" }
  | { type: "click"; rank: number };
