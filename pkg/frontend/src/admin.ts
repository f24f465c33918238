// Admin panels: the service registry table (with the domain column and
// enable toggles) and an ordered-step recipe editor that renders 422
// validation violations next to the offending step.

import { GatewayClient, GatewayError } from "./api.js";
import type { RecipeDoc, RecipeStepDoc, ServiceDoc, ViolationDoc } from "./types.js";

const DOMAINS = ["assignment_planner", "map_server", "storage_server", "automaton"];
const APPLY_RESULTS = ["none", "map_write", "assignment_source"];

export interface StepFormRow {
  step_id: string;
  service_name: string;
  run_order: string;
  depends_on: string;
  apply_result: string;
}

export function buildRecipeDoc(
  name: string,
  description: string,
  requiresAgents: boolean,
  rows: StepFormRow[],
): RecipeDoc {
  const steps: RecipeStepDoc[] = rows.map((row) => ({
    step_id: row.step_id.trim(),
    service_name: row.service_name,
    run_order: Number(row.run_order),
    depends_on: row.depends_on
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0),
    apply_result: row.apply_result as RecipeStepDoc["apply_result"],
  }));
  return { name: name.trim(), description, steps, requires_agents: requiresAgents };
}

export function violationsByStep(violations: ViolationDoc[]): Map<string, string[]> {
  const grouped = new Map<string, string[]>();
  for (const v of violations) {
    const key = v.step_id ?? "";
    grouped.set(key, [...(grouped.get(key) ?? []), v.message]);
  }
  return grouped;
}

export class AdminPanel {
  private services: ServiceDoc[] = [];
  private stepRows: StepFormRow[] = [];
  private lastViolations: ViolationDoc[] = [];

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
    private onChanged: () => void,
  ) {}

  async refresh(): Promise<void> {
    this.services = await this.client.listServices();
    this.renderServices();
    this.renderRecipeEditor();
  }

  private renderServices(): void {
    const table = this.root.querySelector<HTMLElement>("#services-table");
    if (!table) {
      return;
    }
    const rows = this.services
      .map(
        (s) => `
        <tr>
          <td>${s.service_name}</td>
          <td>${s.domain}</td>
          <td class="mono">${s.base_url}</td>
          <td>
            <button class="toggle" data-name="${s.service_name}" data-next="${!s.enabled}">
              ${s.enabled ? "disable" : "enable"}
            </button>
          </td>
        </tr>`,
      )
      .join("");
    table.innerHTML = `
      <table>
        <thead><tr><th>Name</th><th>Domain</th><th>URL</th><th>Enabled</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
      <details>
        <summary>Register service</summary>
        <label>Name <input id="svc-name"></label>
        <label>Domain <select id="svc-domain">${DOMAINS.map(
          (d) => `<option>${d}</option>`,
        ).join("")}</select></label>
        <label>Base URL <input id="svc-url" placeholder="http://host:port"></label>
        <button id="svc-register">Register</button>
        <div id="svc-result" class="mono"></div>
      </details>
    `;
    for (const btn of table.querySelectorAll<HTMLButtonElement>("button.toggle")) {
      btn.onclick = async () => {
        await this.client.setServiceEnabled(btn.dataset.name!, btn.dataset.next === "true");
        await this.refresh();
        this.onChanged();
      };
    }
    table.querySelector<HTMLButtonElement>("#svc-register")!.onclick = async () => {
      const out = table.querySelector<HTMLElement>("#svc-result")!;
      try {
        const doc = await this.client.registerService({
          service_name: table.querySelector<HTMLInputElement>("#svc-name")!.value,
          domain: table.querySelector<HTMLSelectElement>("#svc-domain")!.value,
          base_url: table.querySelector<HTMLInputElement>("#svc-url")!.value,
        });
        out.textContent = `api key (shown once): ${doc.api_key}`;
        await this.refresh();
        this.onChanged();
      } catch (err) {
        out.textContent = err instanceof GatewayError ? err.doc.error : String(err);
      }
    };
  }

  private renderRecipeEditor(): void {
    const editor = this.root.querySelector<HTMLElement>("#recipe-editor");
    if (!editor) {
      return;
    }
    if (this.stepRows.length === 0) {
      this.stepRows.push({
        step_id: "step1",
        service_name: this.services[0]?.service_name ?? "",
        run_order: "1",
        depends_on: "",
        apply_result: "none",
      });
    }
    const byStep = violationsByStep(this.lastViolations);
    const serviceOptions = (selected: string) =>
      this.services
        .map(
          (s) =>
            `<option value="${s.service_name}" ${
              s.service_name === selected ? "selected" : ""
            }>${s.service_name} (${s.domain})</option>`,
        )
        .join("");
    const rowsHtml = this.stepRows
      .map((row, i) => {
        const problems = byStep.get(row.step_id) ?? [];
        return `
        <fieldset data-row="${i}">
          <label>step_id <input class="f-step-id" value="${row.step_id}"></label>
          <label>service <select class="f-service">${serviceOptions(row.service_name)}</select></label>
          <label>run_order <input class="f-run-order" type="number" min="1" value="${row.run_order}"></label>
          <label>depends_on <input class="f-depends" value="${row.depends_on}" placeholder="comma separated"></label>
          <label>apply_result <select class="f-apply">${APPLY_RESULTS.map(
            (a) => `<option ${a === row.apply_result ? "selected" : ""}>${a}</option>`,
          ).join("")}</select></label>
          <button class="remove-step">×</button>
          ${problems.map((m) => `<div class="error badge-violation">${m}</div>`).join("")}
        </fieldset>`;
      })
      .join("");
    const generalProblems = byStep.get("") ?? [];
    editor.innerHTML = `
      <label>Recipe name <input id="recipe-name"></label>
      <label>Description <input id="recipe-desc"></label>
      <label><input id="recipe-agents" type="checkbox" checked> requires agents</label>
      <div id="step-rows">${rowsHtml}</div>
      <button id="add-step">Add step</button>
      <button id="save-recipe">Save recipe</button>
      ${generalProblems.map((m) => `<div class="error">${m}</div>`).join("")}
    `;
    editor.querySelector<HTMLButtonElement>("#add-step")!.onclick = () => {
      this.captureRows(editor);
      this.stepRows.push({
        step_id: `step${this.stepRows.length + 1}`,
        service_name: this.services[0]?.service_name ?? "",
        run_order: String(this.stepRows.length + 1),
        depends_on: "",
        apply_result: "none",
      });
      this.renderRecipeEditor();
    };
    for (const btn of editor.querySelectorAll<HTMLButtonElement>(".remove-step")) {
      btn.onclick = () => {
        this.captureRows(editor);
        const index = Number((btn.closest("fieldset") as HTMLElement).dataset.row);
        this.stepRows.splice(index, 1);
        this.renderRecipeEditor();
      };
    }
    editor.querySelector<HTMLButtonElement>("#save-recipe")!.onclick = async () => {
      this.captureRows(editor);
      const doc = buildRecipeDoc(
        editor.querySelector<HTMLInputElement>("#recipe-name")!.value,
        editor.querySelector<HTMLInputElement>("#recipe-desc")!.value,
        editor.querySelector<HTMLInputElement>("#recipe-agents")!.checked,
        this.stepRows,
      );
      try {
        await this.client.upsertRecipe(doc);
        this.lastViolations = [];
        this.onChanged();
      } catch (err) {
        if (err instanceof GatewayError && Array.isArray(err.doc.violations)) {
          this.lastViolations = err.doc.violations as ViolationDoc[];
        }
      }
      this.renderRecipeEditor();
    };
  }

  private captureRows(editor: HTMLElement): void {
    this.stepRows = [...editor.querySelectorAll<HTMLElement>("fieldset")].map((fs) => ({
      step_id: fs.querySelector<HTMLInputElement>(".f-step-id")!.value,
      service_name: fs.querySelector<HTMLSelectElement>(".f-service")!.value,
      run_order: fs.querySelector<HTMLInputElement>(".f-run-order")!.value,
      depends_on: fs.querySelector<HTMLInputElement>(".f-depends")!.value,
      apply_result: fs.querySelector<HTMLSelectElement>(".f-apply")!.value,
    }));
  }
}
