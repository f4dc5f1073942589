/** Pure view-model layer: every status string is copied verbatim from server
 * JSON, never computed here. The DOM layer renders these structures and the
 * tests exercise them against recorded server fixtures. */

import type {
  ActForm,
  ActRecord,
  ActResponse,
  GraphNode,
  SessionPayload,
  Status,
} from "./types.js";

export interface NodeView {
  id: string;
  label: string;
  kind: "condition" | "exception";
  status: Status;
  /** dashed what-if overlay; present only while a preview is active */
  ghostStatus?: Status;
}

export interface Banner {
  nodeId: string;
  label: string;
  status: Status;
  ghostStatus?: Status;
}

export interface PartyView {
  id: string;
  role: string;
}

export interface SessionView {
  sessionId: string;
  patternId: string;
  nodes: NodeView[];
  edges: [string, string][];
  banners: Banner[];
  acts: ActRecord[];
  parties: PartyView[];
  selectedParty: string;
  revision: number;
  unmatched: string[];
  graphRender: string;
  previewActive: boolean;
  previewNotice: string | null;
  error: string | null;
}

/** Root nodes (no incoming edges) carry the verdict banners. Structural
 * layout only: statuses still come from the server untouched. */
function rootIds(nodes: GraphNode[], edges: [string, string][]): string[] {
  const targets = new Set(edges.map(([, dst]) => dst));
  return nodes.filter((n) => !targets.has(n.id)).map((n) => n.id);
}

function nodeViews(nodes: GraphNode[], verdicts: Record<string, Status>): NodeView[] {
  return nodes.map((n) => ({
    id: n.id,
    label: n.label,
    kind: n.kind,
    status: verdicts[n.id],
  }));
}

function bannerViews(view: Pick<SessionView, "nodes" | "edges">): Banner[] {
  const roots = new Set(
    rootIds(
      view.nodes.map((n) => ({ id: n.id, label: n.label, kind: n.kind, is_ultimate: false })),
      view.edges,
    ),
  );
  return view.nodes
    .filter((n) => roots.has(n.id))
    .map((n) => ({ nodeId: n.id, label: n.label, status: n.status, ghostStatus: n.ghostStatus }));
}

export function viewFromSession(payload: SessionPayload, selectedParty?: string): SessionView {
  const parties = payload.graph.parties.map((p) => ({ id: p.id, role: p.role }));
  const nodes = nodeViews(payload.graph.nodes, payload.verdicts);
  const partial = { nodes, edges: payload.graph.edges };
  return {
    sessionId: payload.session_id,
    patternId: payload.pattern_id,
    nodes,
    edges: payload.graph.edges,
    banners: bannerViews(partial),
    acts: [...payload.acts],
    parties,
    selectedParty: selectedParty ?? parties[0]?.id ?? "",
    revision: payload.revision,
    unmatched: [...payload.unmatched],
    graphRender: payload.graph_render,
    previewActive: false,
    previewNotice: null,
    error: null,
  };
}

/** Fold a committed act response into the view: statuses, render, revision
 * and history all refresh from the server payload. */
export function applyActResponse(
  view: SessionView,
  sent: ActForm,
  response: ActResponse,
): SessionView {
  const nodes = view.nodes.map((n) => ({
    id: n.id,
    label: n.label,
    kind: n.kind,
    status: response.verdicts[n.id],
  }));
  const next: SessionView = {
    ...view,
    nodes,
    banners: bannerViews({ nodes, edges: view.edges }),
    acts: [...view.acts, { act: sent.act, party: sent.party, fact: sent.fact, note: sent.note ?? null }],
    revision: response.revision,
    unmatched: [...response.unmatched],
    graphRender: response.graph_render,
    previewActive: false,
    previewNotice: null,
    error: null,
  };
  return next;
}

/** Overlay what-if statuses from a forked session's act response. The
 * committed state is untouched; discarding the preview must restore it. */
export function applyPreview(view: SessionView, forkResponse: ActResponse): SessionView {
  const nodes = view.nodes.map((n) => ({ ...n, ghostStatus: forkResponse.verdicts[n.id] }));
  return {
    ...view,
    nodes,
    banners: bannerViews({ nodes, edges: view.edges }),
    previewActive: true,
    previewNotice: null,
  };
}

export function discardPreview(view: SessionView): SessionView {
  const nodes = view.nodes.map(({ ghostStatus: _ghost, ...rest }) => ({ ...rest }));
  return {
    ...view,
    nodes,
    banners: bannerViews({ nodes, edges: view.edges }),
    previewActive: false,
    previewNotice: null,
  };
}

export function disablePreview(view: SessionView, notice: string): SessionView {
  return { ...discardPreview(view), previewNotice: notice };
}

export function withError(view: SessionView, message: string | null): SessionView {
  return { ...view, error: message };
}

export function selectParty(view: SessionView, partyId: string): SessionView {
  return { ...view, selectedParty: partyId };
}

export function partyRole(view: SessionView, partyId: string): string | undefined {
  return view.parties.find((p) => p.id === partyId)?.role;
}

/** Judge-only acts stay disabled for the party roles. */
export function canUseAct(view: SessionView, act: ActForm["act"], partyId: string): boolean {
  const role = partyRole(view, partyId);
  if (role === undefined) return false;
  if (act === "plausible") return role === "judge";
  return role !== "judge";
}

export const LEGEND = [
  { shape: "box", meaning: "condition" },
  { shape: "diamond", meaning: "exception" },
  { color: "green", meaning: "holds" },
  { color: "red", meaning: "fails" },
] as const;
