/** Browser wiring: forms in, rendered session views out. One active session
 * per tab; in-flight submissions disable the form so acts never overlap. */

import { ApiClient } from "./api.js";
import {
  refreshSession,
  startSessionFromPattern,
  startSessionFromQuery,
  submitAct,
  whatIfPreview,
} from "./controller.js";
import type { ActForm, ActKind } from "./types.js";
import { SessionView, canUseAct, discardPreview, selectParty } from "./view.js";

const client = new ApiClient(
  (window as unknown as { KRAG_SERVER_URL?: string }).KRAG_SERVER_URL ?? "",
);

let view: SessionView | null = null;
let busy = false;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function toast(message: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = message;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 4000);
}

function statusClass(status: string | undefined): string {
  return status === "holds" ? "holds" : "fails";
}

function render(): void {
  const root = el<HTMLDivElement>("session");
  if (view === null) {
    root.hidden = true;
    return;
  }
  root.hidden = false;

  const banners = el<HTMLDivElement>("banners");
  banners.innerHTML = "";
  for (const banner of view.banners) {
    const div = document.createElement("div");
    div.className = `banner ${statusClass(banner.status)}`;
    div.textContent = `${banner.label}: ${banner.status.toUpperCase()}`;
    if (banner.ghostStatus !== undefined && view.previewActive) {
      const ghost = document.createElement("span");
      ghost.className = `ghost ${statusClass(banner.ghostStatus)}`;
      ghost.textContent = ` what-if: ${banner.ghostStatus.toUpperCase()}`;
      div.appendChild(ghost);
    }
    banners.appendChild(div);
  }

  const table = el<HTMLTableSectionElement>("nodes");
  table.innerHTML = "";
  for (const node of view.nodes) {
    const row = document.createElement("tr");
    const ghost =
      view.previewActive && node.ghostStatus !== undefined ? ` (${node.ghostStatus})` : "";
    row.innerHTML =
      `<td>${node.kind === "exception" ? "&#9670;" : "&#9632;"}</td>` +
      `<td>${node.label}</td>` +
      `<td class="${statusClass(node.status)}${ghost ? " previewing" : ""}">` +
      `${node.status}${ghost}</td>`;
    table.appendChild(row);
  }

  const history = el<HTMLUListElement>("history");
  history.innerHTML = "";
  for (const act of view.acts) {
    const item = document.createElement("li");
    item.textContent = `${act.act}(${act.party}, ${act.fact})` + (act.note ? ` "${act.note}"` : "");
    history.appendChild(item);
  }

  const partySelect = el<HTMLSelectElement>("party");
  partySelect.innerHTML = "";
  for (const party of view.parties) {
    const option = document.createElement("option");
    option.value = party.id;
    option.textContent = `${party.id} (${party.role})`;
    option.selected = party.id === view.selectedParty;
    partySelect.appendChild(option);
  }

  const actSelect = el<HTMLSelectElement>("act");
  for (const option of Array.from(actSelect.options)) {
    option.disabled = !canUseAct(view, option.value as ActKind, view.selectedParty);
  }

  el<HTMLPreElement>("mermaid-source").textContent = view.graphRender;
  el<HTMLSpanElement>("revision").textContent = String(view.revision);
  el<HTMLSpanElement>("pattern").textContent = view.patternId;
  const error = el<HTMLDivElement>("form-error");
  error.textContent = view.error ?? "";
  error.hidden = view.error === null;
  const notice = el<HTMLDivElement>("preview-notice");
  notice.textContent = view.previewNotice ?? "";
  notice.hidden = view.previewNotice === null;
  el<HTMLButtonElement>("discard-preview").hidden = !view.previewActive;
  el<HTMLDivElement>("unmatched").textContent = view.unmatched.length
    ? `unmatched facts: ${view.unmatched.join(", ")}`
    : "";

  drawMermaid(view.graphRender);
}

function drawMermaid(source: string): void {
  const mermaid = (window as unknown as { mermaid?: { render(id: string, src: string): Promise<{ svg: string }> } }).mermaid;
  const target = el<HTMLDivElement>("mermaid-svg");
  if (!mermaid) {
    target.innerHTML = "";
    return;
  }
  mermaid
    .render(`graph-${Date.now()}`, source)
    .then(({ svg }) => {
      target.innerHTML = svg;
    })
    .catch(() => {
      target.innerHTML = "";
    });
}

function actForm(): ActForm {
  if (view === null) throw new Error("no active session");
  const note = el<HTMLInputElement>("note").value.trim();
  return {
    act: el<HTMLSelectElement>("act").value as ActForm["act"],
    party: view.selectedParty,
    fact: el<HTMLInputElement>("fact").value.trim(),
    note: note || undefined,
  };
}

async function guarded(work: () => Promise<void>): Promise<void> {
  if (busy) return;
  busy = true;
  el<HTMLFieldSetElement>("controls").disabled = true;
  try {
    await work();
  } catch (err) {
    toast(err instanceof Error ? err.message : String(err));
  } finally {
    busy = false;
    el<HTMLFieldSetElement>("controls").disabled = false;
    render();
  }
}

export function wire(): void {
  el<HTMLFormElement>("start-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      const query = el<HTMLInputElement>("query").value.trim();
      const patternId = el<HTMLInputElement>("pattern-id").value.trim();
      view = patternId
        ? await startSessionFromPattern(client, patternId)
        : await startSessionFromQuery(client, query);
    });
  });

  el<HTMLSelectElement>("party").addEventListener("change", (event) => {
    if (view === null) return;
    view = selectParty(view, (event.target as HTMLSelectElement).value);
    render();
  });

  el<HTMLFormElement>("act-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      if (view === null) return;
      view = await submitAct(client, view, actForm());
    });
  });

  el<HTMLButtonElement>("preview").addEventListener("click", () => {
    void guarded(async () => {
      if (view === null) return;
      view = await whatIfPreview(client, view, actForm());
    });
  });

  el<HTMLButtonElement>("discard-preview").addEventListener("click", () => {
    if (view === null) return;
    view = discardPreview(view);
    render();
  });

  el<HTMLButtonElement>("refresh").addEventListener("click", () => {
    void guarded(async () => {
      if (view === null) return;
      view = await refreshSession(client, view);
    });
  });
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}
