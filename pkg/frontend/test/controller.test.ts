/** Session flows against a stub transport replaying recorded fixtures. */

import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import path from "node:path";
import test from "node:test";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";
import {
  startSessionFromPattern,
  submitAct,
  whatIfPreview,
} from "../src/controller.js";
import type { ActResponse, SessionPayload } from "../src/types.js";
import { viewFromSession } from "../src/view.js";

const here = path.dirname(fileURLToPath(import.meta.url));

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(path.join(here, "..", "..", "fixtures", `${name}.json`), "utf-8")) as T;
}

const initial = fixture<SessionPayload>("session_initial");
const allegeResponse = fixture<ActResponse>("act_allege_response");
const forkPayload = fixture<SessionPayload>("fork_response");
const forkActResponse = fixture<ActResponse>("fork_act_response");
const plausibleRejected = fixture<{ status: number; body: { error: string } }>(
  "act_plausible_rejected",
);

interface Call {
  url: string;
  method: string;
  body?: string;
}

function stubClient(
  script: Record<string, { status: number; body?: unknown }>,
  calls: Call[] = [],
): ApiClient {
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    calls.push({ url, method, body: init?.body as string | undefined });
    const key = `${method} ${url}`;
    const planned = script[key];
    if (!planned) throw new Error(`unexpected request: ${key}`);
    return new Response(planned.body === undefined ? null : JSON.stringify(planned.body), {
      status: planned.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return new ApiClient("", fetchImpl);
}

test("startSessionFromPattern builds the view from the server payload", async () => {
  const client = stubClient({
    "POST /sessions": { status: 201, body: initial },
  });
  const view = await startSessionFromPattern(client, "car_sale_ownership_defect");
  assert.equal(view.patternId, "car_sale_ownership_defect");
  assert.equal(view.revision, 0);
});

test("submitAct posts to the acts endpoint and folds in the response", async () => {
  const calls: Call[] = [];
  const client = stubClient(
    { [`POST /sessions/${initial.session_id}/acts`]: { status: 200, body: allegeResponse } },
    calls,
  );
  const view = viewFromSession(initial);
  const updated = await submitAct(client, view, {
    act: "allege",
    party: "bob",
    fact: "sale_concluded",
  });
  assert.equal(updated.revision, allegeResponse.revision);
  assert.equal(calls.length, 1);
  assert.equal(JSON.parse(calls[0].body ?? "{}").fact, "sale_concluded");
});

test("a 422 rejection lands inline on the view instead of throwing", async () => {
  const client = stubClient({
    [`POST /sessions/${initial.session_id}/acts`]: {
      status: plausibleRejected.status,
      body: plausibleRejected.body,
    },
  });
  const view = viewFromSession(initial);
  const updated = await submitAct(client, view, {
    act: "plausible",
    party: "bob",
    fact: "sale_concluded",
  });
  assert.equal(updated.revision, view.revision);
  assert.match(updated.error ?? "", /judge/);
});

test("whatIfPreview forks, overlays, and always discards the fork", async () => {
  const calls: Call[] = [];
  const client = stubClient(
    {
      [`POST /sessions/${initial.session_id}/fork`]: { status: 201, body: forkPayload },
      [`POST /sessions/${forkPayload.session_id}/acts`]: { status: 200, body: forkActResponse },
      [`DELETE /sessions/${forkPayload.session_id}`]: { status: 204 },
    },
    calls,
  );
  const view = viewFromSession(initial);
  const previewing = await whatIfPreview(client, view, {
    act: "allege",
    party: "alice",
    fact: "seller_ownership",
  });
  assert.equal(previewing.previewActive, true);
  assert.equal(calls.at(-1)?.method, "DELETE");
  for (const node of previewing.nodes) {
    assert.equal(node.status, initial.verdicts[node.id]);
  }
});

test("fork failure disables the preview with a notice", async () => {
  const client = stubClient({
    [`POST /sessions/${initial.session_id}/fork`]: { status: 500, body: { error: "boom" } },
  });
  const view = viewFromSession(initial);
  const result = await whatIfPreview(client, view, {
    act: "allege",
    party: "bob",
    fact: "sale_concluded",
  });
  assert.equal(result.previewActive, false);
  assert.match(result.previewNotice ?? "", /preview unavailable/);
});
