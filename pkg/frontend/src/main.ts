/** Studio controller: one state object, every service call through one client.

Concurrency rules: a single mutation may be in flight (commit uses the busy
flag), while feature previews carry a generation number so a stale response
can never overwrite a newer one.
*/

import { ApiError, Client } from "./api.js";
import * as model from "./model.js";
import type { FeaturePayload, GraphPayload, QuickEvalPayload } from "./types.js";
import {
  clearBanner,
  commitEnabled,
  renderBanner,
  renderEvalCard,
  renderFeaturePanel,
  renderLatticeView,
  renderPendingList,
  renderSummaryView,
  setStatus,
} from "./view.js";

const METHODS = ["causal-lags", "causal-all", "all", "rfe", "pca", "tree", "lasso"];

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const client = new Client();

const state = {
  graph: null as GraphPayload | null,
  pending: model.emptyPending as model.Pending,
  busy: false,
  previewGeneration: 0,
  tab: "summary" as "summary" | "lattice",
  featuresCurrent: null as FeaturePayload | null,
  featuresPreview: null as FeaturePayload | null,
  featuresError: null as string | null,
  evalNow: null as QuickEvalPayload | null,
  evalPrev: null as QuickEvalPayload | null,
  evalError: null as string | null,
};

let banner: HTMLElement;
let sceneSummary: SVGSVGElement;
let sceneLattice: SVGSVGElement;
let stageForm: HTMLFormElement;
let actionSel: HTMLSelectElement;
let sourceSel: HTMLSelectElement;
let targetSel: HTMLSelectElement;
let lagInput: HTMLInputElement;
let noteInput: HTMLInputElement;
let stageError: HTMLElement;
let pendingList: HTMLElement;
let featureTarget: HTMLSelectElement;
let featureMethod: HTMLSelectElement;
let featurePanel: HTMLElement;
let evalCard: HTMLElement;
let quickEvalBtn: HTMLButtonElement;
let commitBtn: HTMLButtonElement;
let authorInput: HTMLInputElement;
let downloadSlot: HTMLElement;
let statusLine: HTMLElement;

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? err.detail : `${err.status}: ${err.detail}`;
  }
  return err instanceof Error ? err.message : String(err);
}

function fillSelect(select: HTMLSelectElement, options: string[], keep = false): void {
  const previous = select.value;
  select.replaceChildren(
    ...options.map((name) => {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      return option;
    }),
  );
  if (keep && options.includes(previous)) select.value = previous;
}

function repaintScene(): void {
  if (!state.graph) return;
  const edges = model.effectiveEdges(state.graph, state.pending);
  if (state.tab === "summary") {
    renderSummaryView(sceneSummary, state.graph, edges, onEdgeClick);
  } else {
    renderLatticeView(sceneLattice, state.graph, edges);
  }
  sceneSummary.parentElement!.hidden = state.tab !== "summary";
  sceneLattice.parentElement!.hidden = state.tab !== "lattice";
  renderPendingList(pendingList, state.pending, (key) => {
    state.pending = model.unstage(state.pending, key);
    repaintScene();
    void refreshFeatures();
  });
  commitEnabled(commitBtn, state.pending, state.busy);
}

function repaintPanels(): void {
  renderFeaturePanel(
    featurePanel,
    state.featuresCurrent,
    state.featuresPreview,
    state.featuresError,
  );
  renderEvalCard(evalCard, state.evalNow, state.evalPrev, state.evalError);
  const shown = state.featuresPreview ?? state.featuresCurrent;
  quickEvalBtn.disabled = shown === null || shown.columns.length === 0;
}

async function boot(): Promise<void> {
  try {
    const [graph, summary] = await Promise.all([client.graph(), client.summary()]);
    state.graph = graph;
    clearBanner(banner);
    const edges = model.effectiveEdges(graph, state.pending);
    if (edges.length !== summary.edges.length) {
      // both views project the same links; a mismatch means a service bug
      console.warn(
        `summary projection mismatch: drew ${edges.length}, service reports ${summary.edges.length}`,
      );
    }
    fillSelect(sourceSel, graph.variables, true);
    fillSelect(targetSel, graph.variables, true);
    fillSelect(featureTarget, graph.variables, true);
    fillSelect(featureMethod, METHODS, true);
    lagInput.max = String(graph.tau_max);
    repaintScene();
    repaintPanels();
    void refreshFeatures();
  } catch (err) {
    renderBanner(banner, `cannot reach the graph service: ${describe(err)}`, () => {
      void boot();
    });
  }
}

function author(): string {
  return authorInput.value.trim() || "expert";
}

/** Fetch the current feature set, plus the previewed one when edits are staged. */
async function refreshFeatures(): Promise<void> {
  const generation = ++state.previewGeneration;
  const target = featureTarget.value;
  const method = featureMethod.value;
  if (!target || !method) return;
  try {
    const current = await client.features(target, method, false);
    let preview: FeaturePayload | null = null;
    if (model.pendingCount(state.pending) > 0) {
      await client.edits(model.editRequest(author(), state.pending, false));
      preview = await client.features(target, method, true);
    }
    if (generation !== state.previewGeneration) return; // superseded
    state.featuresCurrent = current;
    state.featuresPreview = preview;
    state.featuresError = null;
  } catch (err) {
    if (generation !== state.previewGeneration) return;
    state.featuresCurrent = null;
    state.featuresPreview = null;
    state.featuresError = describe(err);
  }
  repaintPanels();
}

async function runQuickEval(): Promise<void> {
  const target = featureTarget.value;
  const method = featureMethod.value;
  const usePreview = model.pendingCount(state.pending) > 0;
  quickEvalBtn.disabled = true;
  try {
    if (usePreview) {
      // make sure the service preview slot matches what is staged here
      await client.edits(model.editRequest(author(), state.pending, false));
    }
    const result = await client.quickEval(target, method, usePreview);
    state.evalPrev = state.evalNow;
    state.evalNow = result;
    state.evalError = null;
  } catch (err) {
    state.evalError = describe(err);
  } finally {
    repaintPanels();
  }
}

async function commit(): Promise<void> {
  if (state.busy || !state.graph) return;
  const batch = state.pending;
  const who = author();
  state.busy = true;
  commitEnabled(commitBtn, state.pending, state.busy);
  try {
    const resp = await client.edits(model.editRequest(who, batch, true));
    state.graph = resp.graph;
    state.pending = model.emptyPending;
    offerDownload(who, batch);
    setStatus(statusLine, "committed; edited graph saved beside the service's input file");
    repaintScene();
    void refreshFeatures();
  } catch (err) {
    // a rejected batch stays staged so no expert work is lost
    setStatus(statusLine, `commit rejected: ${describe(err)}`, true);
  } finally {
    state.busy = false;
    commitEnabled(commitBtn, state.pending, state.busy);
  }
}

function offerDownload(who: string, batch: model.Pending): void {
  const blob = new Blob([model.editSpecFile(who, batch)], { type: "application/json" });
  const anchor = document.createElement("a");
  anchor.href = URL.createObjectURL(blob);
  anchor.download = "edits.json";
  anchor.textContent = "download edit batch (edits.json)";
  downloadSlot.replaceChildren(anchor);
}

function onEdgeClick(
  source: string,
  target: string,
  lag: number,
  edgeState: model.EdgeState,
): void {
  if (edgeState === "pending-add" || edgeState === "pending-removal") {
    state.pending = model.unstage(state.pending, model.keyOf(source, target, lag));
    repaintScene();
    void refreshFeatures();
    return;
  }
  // clicking a committed lag loads it into the form as a removal candidate
  actionSel.value = "remove";
  sourceSel.value = source;
  targetSel.value = target;
  lagInput.value = String(lag);
}

function onStage(event: Event): void {
  event.preventDefault();
  if (!state.graph) return;
  const entry = {
    source: sourceSel.value,
    target: targetSel.value,
    lag: Number(lagInput.value),
    note: noteInput.value.trim(),
  };
  try {
    state.pending =
      actionSel.value === "add"
        ? model.stageAdd(state.graph, state.pending, entry)
        : model.stageRemove(state.graph, state.pending, entry);
    stageError.textContent = "";
    noteInput.value = "";
    repaintScene();
    void refreshFeatures();
  } catch (err) {
    if (err instanceof model.StageError) {
      stageError.textContent = err.message;
      return;
    }
    throw err;
  }
}

function wire(): void {
  banner = byId("banner");
  sceneSummary = byId<HTMLElement>("scene-summary") as unknown as SVGSVGElement;
  sceneLattice = byId<HTMLElement>("scene-lattice") as unknown as SVGSVGElement;
  stageForm = byId<HTMLFormElement>("stage-form");
  actionSel = byId<HTMLSelectElement>("stage-action");
  sourceSel = byId<HTMLSelectElement>("stage-source");
  targetSel = byId<HTMLSelectElement>("stage-target");
  lagInput = byId<HTMLInputElement>("stage-lag");
  noteInput = byId<HTMLInputElement>("stage-note");
  stageError = byId("stage-error");
  pendingList = byId("pending-list");
  featureTarget = byId<HTMLSelectElement>("feature-target");
  featureMethod = byId<HTMLSelectElement>("feature-method");
  featurePanel = byId("feature-panel");
  evalCard = byId("eval-card");
  quickEvalBtn = byId<HTMLButtonElement>("quick-eval");
  commitBtn = byId<HTMLButtonElement>("commit");
  authorInput = byId<HTMLInputElement>("author");
  downloadSlot = byId("download-slot");
  statusLine = byId("status");

  stageForm.addEventListener("submit", onStage);
  quickEvalBtn.addEventListener("click", () => void runQuickEval());
  commitBtn.addEventListener("click", () => void commit());
  featureTarget.addEventListener("change", () => void refreshFeatures());
  featureMethod.addEventListener("change", () => void refreshFeatures());
  byId("tab-summary").addEventListener("click", () => {
    state.tab = "summary";
    repaintScene();
  });
  byId("tab-lattice").addEventListener("click", () => {
    state.tab = "lattice";
    repaintScene();
  });
  void boot();
}

document.addEventListener("DOMContentLoaded", wire);
