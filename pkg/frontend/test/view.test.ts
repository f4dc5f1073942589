/** Contract tests against recorded server fixtures: the view layer must echo
 * every server status verbatim and never invent one. */

import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import path from "node:path";
import test from "node:test";
import { fileURLToPath } from "node:url";

import type { ActResponse, SessionPayload } from "../src/types.js";
import {
  applyActResponse,
  applyPreview,
  canUseAct,
  discardPreview,
  disablePreview,
  selectParty,
  viewFromSession,
} from "../src/view.js";

const here = path.dirname(fileURLToPath(import.meta.url));

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(path.join(here, "..", "..", "fixtures", `${name}.json`), "utf-8")) as T;
}

const initial = fixture<SessionPayload>("session_initial");
const allegeResponse = fixture<ActResponse>("act_allege_response");
const admissionResponse = fixture<ActResponse>("act_admission_response");
const forkActResponse = fixture<ActResponse>("fork_act_response");

test("initial view mirrors the recorded all-fails session", () => {
  const view = viewFromSession(initial);
  assert.equal(view.sessionId, initial.session_id);
  assert.equal(view.nodes.length, initial.graph.nodes.length);
  for (const node of view.nodes) {
    assert.equal(node.status, initial.verdicts[node.id]);
  }
  assert.ok(view.banners.length >= 1);
  for (const banner of view.banners) {
    assert.equal(banner.status, initial.verdicts[banner.nodeId]);
  }
  assert.equal(view.revision, 0);
  assert.deepEqual(view.acts, []);
});

test("committed act updates the banner to the server status verbatim", () => {
  let view = viewFromSession(initial);
  view = applyActResponse(
    view,
    { act: "allege", party: "bob", fact: "sale_concluded" },
    allegeResponse,
  );
  view = applyActResponse(
    view,
    { act: "admission", party: "alice", fact: "sale_concluded" },
    admissionResponse,
  );
  const banner = view.banners.find((b) => b.nodeId === "c_nullification_right");
  assert.ok(banner !== undefined);
  assert.equal(banner?.status, admissionResponse.verdicts["c_nullification_right"]);
  assert.equal(view.revision, admissionResponse.revision);
  assert.equal(view.acts.length, 2);
  assert.equal(view.graphRender, admissionResponse.graph_render);
  for (const node of view.nodes) {
    assert.equal(node.status, admissionResponse.verdicts[node.id]);
  }
});

test("what-if preview overlays ghosts and discard restores the exact prior view", () => {
  const before = viewFromSession(initial);
  const previewing = applyPreview(before, forkActResponse);
  assert.equal(previewing.previewActive, true);
  for (const node of previewing.nodes) {
    assert.equal(node.ghostStatus, forkActResponse.verdicts[node.id]);
    assert.equal(node.status, initial.verdicts[node.id]); // committed state untouched
  }
  const restored = discardPreview(previewing);
  assert.deepEqual(restored, before);
});

test("preview on an already-established state shows identical ghosts", () => {
  let view = viewFromSession(initial);
  view = applyActResponse(
    view,
    { act: "allege", party: "bob", fact: "sale_concluded" },
    allegeResponse,
  );
  const sameStatuses: ActResponse = {
    verdicts: { ...allegeResponse.verdicts },
    graph_render: allegeResponse.graph_render,
    revision: allegeResponse.revision + 1,
    unmatched: [],
  };
  const previewing = applyPreview(view, sameStatuses);
  for (const node of previewing.nodes) {
    assert.equal(node.ghostStatus, node.status);
  }
});

test("plausible control is disabled for non-judge roles and enabled for the judge", () => {
  const view = viewFromSession(initial);
  assert.equal(canUseAct(view, "plausible", "bob"), false);
  assert.equal(canUseAct(view, "plausible", "alice"), false);
  assert.equal(canUseAct(view, "plausible", "court"), true);
  assert.equal(canUseAct(view, "allege", "bob"), true);
  assert.equal(canUseAct(view, "allege", "court"), false);
  assert.equal(canUseAct(view, "allege", "nobody"), false);
});

test("party selection is view-only state", () => {
  const view = viewFromSession(initial);
  const switched = selectParty(view, "alice");
  assert.equal(switched.selectedParty, "alice");
  assert.deepEqual(switched.nodes, view.nodes);
});

test("fork failure disables the overlay with a notice", () => {
  const view = viewFromSession(initial);
  const disabled = disablePreview(view, "preview unavailable: fork failed");
  assert.equal(disabled.previewActive, false);
  assert.match(disabled.previewNotice ?? "", /preview unavailable/);
  assert.deepEqual(disabled.nodes, view.nodes);
});

test("legend constants match the server's render vocabulary", async () => {
  const { LEGEND } = await import("../src/view.js");
  const meanings = LEGEND.map((item) => item.meaning);
  assert.deepEqual(meanings, ["condition", "exception", "holds", "fails"]);
});
