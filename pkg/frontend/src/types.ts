/** Server JSON shapes. The client never re-derives any of these values. */

export type NodeKind = "condition" | "exception";
export type Status = string; // verbatim server status text ("holds" | "fails")

export interface GraphNode {
  id: string;
  label: string;
  kind: NodeKind;
  is_ultimate: boolean;
}

export interface GraphPayload {
  nodes: GraphNode[];
  edges: [string, string][];
  statements: { head: string; requires: string[]; except: string[]; proponent: string }[];
  parties: { id: string; role: string }[];
}

export interface SessionPayload {
  session_id: string;
  pattern_id: string;
  graph: GraphPayload;
  verdicts: Record<string, Status>;
  acts: ActRecord[];
  unmatched: string[];
  revision: number;
  created_at: number;
  graph_render: string;
}

export interface ActRecord {
  act: string;
  party: string;
  fact: string;
  note: string | null;
}

export interface ActResponse {
  verdicts: Record<string, Status>;
  graph_render: string;
  revision: number;
  unmatched: string[];
}

export interface QueryResponse {
  answer: string;
  explanation: unknown;
  graph_render: string;
  citations: string[];
  disclaimer: string;
  pattern_id: string;
  trace: { stage: string; ms: number }[];
  verdicts: Record<string, Status>;
  unmatched: string[];
}

export interface ApiError {
  status: number;
  message: string;
}

export type ActKind = "allege" | "provide_evidence" | "admission" | "plausible";

export interface ActForm {
  act: ActKind;
  party: string;
  fact: string;
  note?: string;
}
