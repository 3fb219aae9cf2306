/** Wire types mirroring the session service's JSON views. */

export type SessionStatus = "Active" | "Success" | "Failure";

export type Scenario = "Event" | "Person" | "Location" | "Temporal" | "Decision";

export interface TurnView {
  turn: number;
  cue: string;
  strategy_id: string;
  strategy_name: string;
  /** Scenario the strategy belongs to; rendered as the cue's badge. */
  scenario: Scenario;
  answer: string | null;
  composite: number | null;
  declared_recalled: boolean;
}

export interface SessionView {
  session_id: string;
  bank_id: string;
  query: string;
  scenario: Scenario;
  status: SessionStatus;
  turns: TurnView[];
  turn_count: number;
  /** Present when the last cue failed to generate; answering retries it. */
  error?: string;
}

export interface StrategyInfo {
  strategy_id: string;
  scenario: Scenario;
  name: string;
  description: string;
}

export interface StartRequest {
  query: string;
  bank_id?: string;
  inline_bank?: Array<{ text: string; fragment_id?: string }>;
  gold_answer?: string;
}

export interface AnswerRequest {
  text?: string;
  recalled?: boolean;
}
