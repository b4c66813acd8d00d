/** Wire types for the diagnostic service JSON API. */

export interface Triplet {
  disease: string;
  relation: string;
  feature: string;
}

export interface Recommendation {
  diagnosis: string;
  treatment: string | null;
  medication: string | null;
  follow_up_question: string | null;
  supporting_ehr_ids: string[];
  supporting_triplets: Triplet[];
}

export interface EvidenceItem {
  kind: "utterance" | "uploaded-ehr" | "typed-query" | "answer";
  text: string;
  timestamp: number;
}

export interface SessionView {
  session_id: string;
  status: "collecting" | "awaiting-answer" | "concluded";
  transcript: EvidenceItem[];
  pending_question: string | null;
  latest_recommendation: Recommendation | null;
}

export interface SessionSummary {
  session_id: string;
  status: string;
  evidence_count: number;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}

export type InputMode = "speaking" | "uploading" | "typewriting";
