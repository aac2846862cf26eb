/** What-if probe: re-score an edited candidate against the live model and
 *  show old AQI, new AQI and the delta. Every submit fetches fresh scores;
 *  nothing is cached, so a retrained model is always reflected. */

import type { ApiClient, RecordRow } from "./api.js";

export interface FieldProblem {
  field: string;
  message: string;
}

export interface DeltaResult {
  before: number;
  after: number;
  delta: number;
}

const GPA_FIELDS = ["gpa_u", "gpa_g"];
const RANK_FIELDS = ["r_nat_bs", "r_nat_phd", "r_inat_bs", "r_inat_phd"];

/** Client-side sanity checks so obviously bad edits never reach the wire. */
export function validateRecord(row: RecordRow): FieldProblem[] {
  const problems: FieldProblem[] = [];
  const scale = toNumber(row.gpa_scale ?? 4.0);
  for (const [field, raw] of Object.entries(row)) {
    if (field === "candidate_id" || raw === null || raw === "") continue;
    const value = toNumber(raw);
    if (value === null || !Number.isFinite(value)) {
      problems.push({ field, message: "must be a number" });
      continue;
    }
    if (GPA_FIELDS.includes(field)) {
      if (value < 0 || (scale !== null && value > scale)) {
        problems.push({
          field,
          message: `must be between 0 and ${scale ?? 4}`,
        });
      }
    } else if (RANK_FIELDS.includes(field)) {
      if (value < 1) problems.push({ field, message: "rank starts at 1" });
    } else if (field.startsWith("n_") || field.startsWith("t_")) {
      if (value < 0) problems.push({ field, message: "must not be negative" });
    }
  }
  const tRes = toNumber(row.t_res ?? null);
  const tResPrime = toNumber(row.t_res_prime ?? null);
  if (tRes !== null && tResPrime !== null && tRes < tResPrime) {
    problems.push({
      field: "t_res",
      message: "total research time must cover post-PhD time",
    });
  }
  return problems;
}

function toNumber(v: string | number | null): number | null {
  if (v === null || v === "") return null;
  const n = typeof v === "number" ? v : Number(v);
  return Number.isNaN(n) ? null : n;
}

/** Score baseline and edited rows in one request and report the AQI move. */
export async function scoreDelta(
  client: ApiClient,
  modelId: string,
  baseline: RecordRow,
  edited: RecordRow,
  level?: string,
): Promise<DeltaResult> {
  const rows = [
    { ...baseline, candidate_id: "whatif-baseline" },
    { ...edited, candidate_id: "whatif-edited" },
  ];
  const { report } = await client.scoreRecords(modelId, rows, level);
  const byId = new Map(report.entries.map((e) => [e.candidate_id, e.aqi]));
  const before = byId.get("whatif-baseline");
  const after = byId.get("whatif-edited");
  if (before === undefined || after === undefined) {
    throw new Error("score response is missing the what-if rows");
  }
  return { before, after, delta: after - before };
}

export class WhatIfPanel {
  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  /** Apply one field edit on top of the baseline and re-score. Returns the
   *  delta, or null when client-side validation blocked the request. */
  async submitEdit(
    modelId: string,
    baseline: RecordRow,
    field: string,
    value: string | number,
    level?: string,
  ): Promise<DeltaResult | null> {
    this.clearErrors();
    const edited: RecordRow = { ...baseline, [field]: value };
    const problems = validateRecord(edited);
    if (problems.length > 0) {
      this.renderErrors(problems);
      return null;
    }
    const result = await scoreDelta(
      this.client,
      modelId,
      baseline,
      edited,
      level,
    );
    this.renderResult(result);
    return result;
  }

  private clearErrors(): void {
    this.root
      .querySelectorAll(".field-error")
      .forEach((el) => el.remove());
  }

  private renderErrors(problems: FieldProblem[]): void {
    for (const p of problems) {
      const note = document.createElement("span");
      note.className = "field-error";
      note.dataset.field = p.field;
      note.textContent = p.message;
      const input = this.root.querySelector(`[name="${p.field}"]`);
      if (input?.parentElement) {
        input.parentElement.appendChild(note);
      } else {
        this.root.appendChild(note);
      }
    }
  }

  private renderResult(result: DeltaResult): void {
    let out = this.root.querySelector<HTMLElement>(".whatif-result");
    if (!out) {
      out = document.createElement("div");
      out.className = "whatif-result";
      this.root.appendChild(out);
    }
    const sign = result.delta >= 0 ? "+" : "";
    out.innerHTML = `
      <span class="before">AQI ${result.before.toFixed(2)}</span>
      <span class="arrow">&rarr;</span>
      <span class="after">AQI ${result.after.toFixed(2)}</span>
      <span class="delta ${result.delta >= 0 ? "gain" : "loss"}">
        ${sign}${result.delta.toFixed(2)}
      </span>
    `;
    out.dataset.delta = String(result.delta);
  }
}
