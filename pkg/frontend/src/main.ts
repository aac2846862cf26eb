/** Console wiring: one session against one service instance. Edits stay
 *  local until a form is submitted; every displayed number comes from a
 *  service response. */

import { ApiClient, ApiError, InflightDedup } from "./api.js";
import type { AQIReport, TrainRequest } from "./api.js";
import { renderLeaderboard } from "./leaderboard.js";
import { RankingEditor } from "./ranking.js";
import { WhatIfPanel } from "./whatif.js";

interface SessionState {
  cohortId: string | null;
  modelId: string | null;
  report: AQIReport | null;
}

const state: SessionState = { cohortId: null, modelId: null, report: null };
const dedup = new InflightDedup();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(err: unknown): void {
  const banner = el<HTMLElement>("error-banner");
  if (err instanceof ApiError) {
    banner.textContent = err.fieldPath
      ? `${err.code} at ${err.fieldPath}: ${err.message}`
      : `${err.code}: ${err.message}`;
  } else {
    banner.textContent = String(err);
  }
  banner.hidden = false;
}

function clearError(): void {
  el<HTMLElement>("error-banner").hidden = true;
}

function numberField(id: string): number | undefined {
  const raw = el<HTMLInputElement>(id).value.trim();
  if (raw === "") return undefined;
  const n = Number(raw);
  return Number.isFinite(n) ? n : undefined;
}

async function refreshHealth(client: ApiClient): Promise<void> {
  const health = await dedup.run("health", () => client.health());
  el<HTMLElement>("backend-label").textContent =
    `backend: ${health.backend}`;
}

async function createCohort(client: ApiClient): Promise<void> {
  const summary = await dedup.run("cohort", () =>
    client.createCohortFromSpec({
      n_pos: numberField("n-pos") ?? 10,
      n_neg: numberField("n-neg") ?? 10,
      rng_seed: numberField("cohort-seed") ?? 0,
    }),
  );
  state.cohortId = summary.cohort_id;
  el<HTMLElement>("cohort-label").textContent =
    `${summary.cohort_id} (${summary.n_pos}+${summary.n_neg}, ${summary.level})`;
}

function trainRequest(ranking: RankingEditor): TrainRequest {
  if (!state.cohortId) throw new Error("create or pick a cohort first");
  const kind = el<HTMLSelectElement>("model-kind")
    .value as TrainRequest["kind"];
  const config: Record<string, number> = {};
  const gamma = numberField("gamma");
  const seed = numberField("train-seed");
  const margin = numberField("margin");
  const epochs = numberField("epochs");
  if (gamma !== undefined) config.gamma = gamma;
  if (seed !== undefined) config.rng_seed = seed;
  if (kind === "contrastive" || kind === "triplet") {
    if (margin !== undefined) config.margin = margin;
    if (epochs !== undefined) config.epochs = epochs;
  }
  const req: TrainRequest = { cohort_id: state.cohortId, kind, config };
  if (kind === "m1") req.ranking = ranking.permutation();
  const rMin = numberField("r-min");
  const rMax = numberField("r-max");
  if (rMin !== undefined || rMax !== undefined) {
    req.bounds = { r_min: rMin, r_max: rMax };
  }
  return req;
}

async function train(
  client: ApiClient,
  ranking: RankingEditor,
): Promise<void> {
  const response = await dedup.run("train", async () => {
    const first = await client.train(trainRequest(ranking));
    if (first.status !== "running") return first;
    await client.waitForRun(first.run_id);
    return client
      .getModel(first.model_id)
      .then((m) => ({ ...first, status: "done" as const, artifact: m.artifact }));
  });
  state.modelId = response.model_id;
  el<HTMLElement>("model-label").textContent =
    `${response.model_id} (${response.status}${response.cached ? ", cached" : ""})`;
}

async function scoreCohort(client: ApiClient): Promise<void> {
  if (!state.cohortId || !state.modelId) {
    throw new Error("need a cohort and a trained model");
  }
  const cohortId = state.cohortId;
  const modelId = state.modelId;
  const report = await dedup.run("score", async () => {
    const { document: doc } = await client.getCohort(cohortId);
    const features = doc.members.map((m) => ({
      candidate_id: m.candidate_id,
      x: m.x,
    }));
    const res = await client.scoreFeatures(modelId, features);
    return res.report;
  });
  state.report = report;
  renderLeaderboard(el("leaderboard"), report);
}

export function boot(base: string): void {
  const client = new ApiClient(base);
  const ranking = new RankingEditor();
  const whatif = new WhatIfPanel(el("whatif-panel"), client);

  ranking.render(el("ranking-editor"));

  const guarded = (fn: () => Promise<void>) => () => {
    clearError();
    fn().catch(showError);
  };

  el<HTMLButtonElement>("create-cohort").addEventListener(
    "click",
    guarded(() => createCohort(client)),
  );
  el<HTMLButtonElement>("train-model").addEventListener(
    "click",
    guarded(() => train(client, ranking)),
  );
  el<HTMLButtonElement>("score-cohort").addEventListener(
    "click",
    guarded(() => scoreCohort(client)),
  );
  el<HTMLButtonElement>("whatif-submit").addEventListener(
    "click",
    guarded(async () => {
      if (!state.modelId) throw new Error("train a model first");
      const field = el<HTMLSelectElement>("whatif-field").value;
      const value = el<HTMLInputElement>("whatif-value").value;
      const baseline = {
        candidate_id: "baseline",
        n_q1: numberField("base-n-q1") ?? 4,
        n_q1_fa: numberField("base-n-q1-fa") ?? 2,
        n_cit: numberField("base-n-cit") ?? 200,
        h_ind: numberField("base-h-ind") ?? 8,
        t_res: numberField("base-t-res") ?? 8,
        t_res_prime: numberField("base-t-res-prime") ?? 5,
        gpa_u: numberField("base-gpa-u") ?? 3.4,
        gpa_g: numberField("base-gpa-g") ?? 3.6,
      };
      await whatif.submitEdit(state.modelId, baseline, field, value);
    }),
  );

  refreshHealth(client).catch(showError);
}

declare global {
  interface Window {
    aqindexBoot: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.aqindexBoot = boot;
}
