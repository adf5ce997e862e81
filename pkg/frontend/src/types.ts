/** Wire types mirroring the session service's versioned JSON schemas. */

export type DisplayKind = "static" | "hops";
export type FeedbackStructure = "bandit" | "full";

export interface OutcomeFrameDoc {
  flow: number[];
  pickups: number[];
  probabilities: number[];
}

export interface DisplayPayloadDoc {
  schema: string;
  kind: DisplayKind;
  static: {
    flows: number[];
    pickups: number[];
    probabilities: number[];
  };
  frames?: OutcomeFrameDoc[];
  frame_interval: number;
}

export interface TreatmentDoc {
  display: DisplayKind;
  feedback: FeedbackStructure;
}

export interface ComprehensionSpecDoc {
  kind: "choice" | "estimate";
  prompt: string;
  options: string[] | null;
  district: string | null;
}

export interface SessionDoc {
  schema: string;
  session_id: string;
  level: number;
  treatment: TreatmentDoc;
  instruction_text?: string;
  n_trials?: number;
  cursor?: number;
  done?: boolean;
  comprehension_passed?: boolean;
  running_reward?: number;
  comprehension: ComprehensionSpecDoc;
}

export interface ComprehensionResultDoc {
  schema: string;
  passed: boolean;
  attempts: number;
  retry_allowed: boolean;
  unlocked: boolean;
}

export interface TrialDoc {
  schema: string;
  trial: number;
  n_trials: number;
  display: DisplayPayloadDoc;
  competitor_count: number;
  elicitation: {
    required_sum: number;
    districts: string[];
  };
}

export interface FeedbackDoc {
  schema: string;
  trial: number;
  structure: FeedbackStructure;
  got_pickup: boolean;
  reward_delta: number;
  running_reward: number;
  done: boolean;
  displayed_flows?: number[];
  displayed_probabilities?: number[];
  realized_flows?: number[];
  realized_probabilities?: number[];
  anticipated_flows?: number[];
  prediction_error?: number[];
  anticipation_gap?: number[];
}

export interface ErrorDoc {
  schema: string;
  code: string;
  message: string;
  residual?: number;
}

export interface ResponseBody {
  district: string;
  anticipated: Record<string, number>;
}
