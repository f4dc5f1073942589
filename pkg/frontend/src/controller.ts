/** Session flows connecting the REST client to the view-model. DOM-free and
 * fully testable: the browser layer only renders the returned views. */

import { ApiClient, ApiRequestError } from "./api.js";
import type { ActForm } from "./types.js";
import {
  SessionView,
  applyActResponse,
  applyPreview,
  disablePreview,
  viewFromSession,
  withError,
} from "./view.js";

export async function startSessionFromPattern(
  client: ApiClient,
  patternId: string,
): Promise<SessionView> {
  return viewFromSession(await client.createSessionFromPattern(patternId));
}

export async function startSessionFromQuery(
  client: ApiClient,
  query: string,
): Promise<SessionView> {
  return viewFromSession(await client.createSessionFromQuery(query));
}

/** Commit an act. Validation failures (422) surface inline on the view
 * instead of throwing. */
export async function submitAct(
  client: ApiClient,
  view: SessionView,
  act: ActForm,
): Promise<SessionView> {
  try {
    const response = await client.postAct(view.sessionId, act);
    return applyActResponse(view, act, response);
  } catch (err) {
    if (err instanceof ApiRequestError && err.status === 422) {
      return withError(view, err.message);
    }
    throw err;
  }
}

/** Ghost-overlay a hypothetical act through a throwaway server-side fork.
 * The fork is discarded whatever happens; fork failure disables the overlay
 * with a notice rather than erroring the session. */
export async function whatIfPreview(
  client: ApiClient,
  view: SessionView,
  act: ActForm,
): Promise<SessionView> {
  let forkId: string | null = null;
  try {
    const fork = await client.forkSession(view.sessionId);
    forkId = fork.session_id;
    const response = await client.postAct(forkId, act);
    return applyPreview(view, response);
  } catch (err) {
    const reason = err instanceof Error ? err.message : String(err);
    return disablePreview(view, `preview unavailable: ${reason}`);
  } finally {
    if (forkId !== null) {
      await client.deleteSession(forkId).catch(() => undefined);
    }
  }
}

/** Re-sync the view with the server's authoritative session state. */
export async function refreshSession(client: ApiClient, view: SessionView): Promise<SessionView> {
  return viewFromSession(await client.getSession(view.sessionId), view.selectedParty);
}
