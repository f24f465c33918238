// Mission dispatch form and live mission cards.

import { GatewayClient, GatewayError } from "./api.js";
import type { DashboardState } from "./state.js";
import { TERMINAL_STATUSES, type MissionDoc, type RecipeDoc } from "./types.js";

export function describeError(err: unknown): string {
  if (err instanceof GatewayError) {
    const extra = err.doc.agent ? ` (${err.doc.agent})` : "";
    return `${err.doc.error}${extra}`;
  }
  return String(err);
}

export class MissionPanel {
  private recipes: RecipeDoc[] = [];

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
    private state: DashboardState,
  ) {}

  setRecipes(recipes: RecipeDoc[]): void {
    this.recipes = recipes.filter((r) => !r.degraded);
    this.renderForm();
  }

  renderForm(): void {
    const form = this.root.querySelector<HTMLElement>("#mission-form");
    if (!form) {
      return;
    }
    const recipeOptions = this.recipes
      .map((r) => `<option value="${r.name}">${r.name}</option>`)
      .join("");
    const agentOptions = this.state
      .freeAgents()
      .map((a) => `<option value="${a.agent_uuid}">${a.name || a.agent_uuid}</option>`)
      .join("");
    form.innerHTML = `
      <label>Recipe <select id="recipe-select">${recipeOptions}</select></label>
      <label>Agents (free only)
        <select id="agent-select" multiple size="4">${agentOptions}</select>
      </label>
      <label>Request payload
        <textarea id="request-editor" rows="6" spellcheck="false">{}</textarea>
      </label>
      <button id="dispatch-btn">Dispatch mission</button>
      <div id="form-error" class="error"></div>
    `;
    const recipeSelect = form.querySelector<HTMLSelectElement>("#recipe-select")!;
    const editor = form.querySelector<HTMLTextAreaElement>("#request-editor")!;
    const seed = () => {
      const recipe = this.recipes.find((r) => r.name === recipeSelect.value);
      editor.value = JSON.stringify(
        { _note: recipe?.description || recipe?.name || "" },
        null,
        2,
      );
    };
    recipeSelect.onchange = seed;
    if (this.recipes.length) {
      seed();
    }
    form.querySelector<HTMLButtonElement>("#dispatch-btn")!.onclick = () => this.dispatch(form);
  }

  private async dispatch(form: HTMLElement): Promise<void> {
    const errorBox = form.querySelector<HTMLElement>("#form-error")!;
    errorBox.textContent = "";
    const recipeName = form.querySelector<HTMLSelectElement>("#recipe-select")!.value;
    const agentSelect = form.querySelector<HTMLSelectElement>("#agent-select")!;
    const agents = [...agentSelect.selectedOptions].map((o) => o.value);
    let request: unknown;
    try {
      request = JSON.parse(form.querySelector<HTMLTextAreaElement>("#request-editor")!.value);
    } catch {
      errorBox.textContent = "request payload is not valid JSON";
      return;
    }
    try {
      await this.client.createMission(recipeName, request, agents);
    } catch (err) {
      errorBox.textContent = describeError(err);
    }
  }

  renderCards(): void {
    const list = this.root.querySelector<HTMLElement>("#mission-cards");
    if (!list) {
      return;
    }
    list.innerHTML = "";
    for (const mission of this.state.sortedMissions().slice(0, 20)) {
      list.appendChild(this.card(mission));
    }
  }

  private card(mission: MissionDoc): HTMLElement {
    const div = document.createElement("div");
    div.className = `mission-card status-${mission.status}`;
    const terminal = TERMINAL_STATUSES.includes(mission.status);
    const timeline = (this.state.timelines.get(mission.mission_id) ?? [])
      .slice(-8)
      .map((e) => `<li>${e.label}</li>`)
      .join("");
    div.innerHTML = `
      <header>
        <strong>${mission.recipe_name}</strong>
        <span class="badge ${mission.status}">${mission.status}</span>
      </header>
      <div class="mono">${mission.mission_id.slice(0, 8)} · agents: ${
        mission.agent_uuids.join(", ") || "none"
      }</div>
      ${mission.failure_reason ? `<div class="error">${mission.failure_reason}</div>` : ""}
      <ul class="timeline">${timeline}</ul>
      ${terminal ? "" : `<button class="cancel-btn">Cancel</button>`}
    `;
    const cancel = div.querySelector<HTMLButtonElement>(".cancel-btn");
    if (cancel) {
      cancel.onclick = async () => {
        cancel.disabled = true;
        try {
          await this.client.cancelMission(mission.mission_id);
        } catch (err) {
          div.querySelector(".timeline")!.insertAdjacentHTML(
            "beforebegin",
            `<div class="error">${describeError(err)}</div>`,
          );
        }
      };
    }
    return div;
  }
}
