import { GatewayClient, GatewayError, type Session } from "./api.js";
import { AdminPanel } from "./admin.js";
import { MissionPanel } from "./missions.js";
import { DashboardState } from "./state.js";
import { EventStream } from "./stream.js";
import type { StreamEvent } from "./types.js";
import { YardView } from "./yardview.js";

const app = document.getElementById("app")!;

function renderLogin(message = ""): void {
  app.innerHTML = `
    <div id="login">
      <h1>yard control tower</h1>
      <label>Gateway URL <input id="login-url" value="${
        localStorage.getItem("yard-url") ?? "http://127.0.0.1:8700"
      }"></label>
      <label>Token <input id="login-token" value="${
        localStorage.getItem("yard-token") ?? ""
      }"></label>
      <button id="login-btn">Connect</button>
      <div class="error">${message}</div>
    </div>
  `;
  document.getElementById("login-btn")!.onclick = () => {
    const baseUrl = (document.getElementById("login-url") as HTMLInputElement).value.replace(/\/+$/, "");
    const token = (document.getElementById("login-token") as HTMLInputElement).value.trim();
    localStorage.setItem("yard-url", baseUrl);
    localStorage.setItem("yard-token", token);
    void start({ baseUrl, token });
  };
}

async function start(session: Session): Promise<void> {
  const client = new GatewayClient(session);
  const state = new DashboardState();

  let isAdmin = false;
  try {
    const [agents, missions, yard] = await Promise.all([
      client.listAgents(),
      client.listMissions(),
      client.getMap(),
    ]);
    state.loadSnapshot(agents, missions, yard);
    try {
      await client.listServices();
      // reachable for operators too; admin detection via a write-less admin
      // endpoint probe is not available, so try a harmless admin GET pattern:
      isAdmin = await probeAdmin(client);
    } catch {
      isAdmin = false;
    }
  } catch (err) {
    renderLogin(err instanceof GatewayError ? err.doc.error : String(err));
    return;
  }

  app.innerHTML = `
    <div id="banner" class="hidden">connection lost — reconnecting…</div>
    <div id="layout">
      <section id="yard-panel">
        <h2>Yard</h2>
        <canvas id="yard-canvas" width="640" height="480"></canvas>
        <div class="legend">
          <span class="dot free"></span>free
          <span class="dot ready"></span>ready
          <span class="dot busy"></span>busy
        </div>
      </section>
      <section id="mission-panel">
        <h2>Missions</h2>
        <div id="mission-form"></div>
        <div id="mission-cards"></div>
      </section>
      <section id="admin-panel" class="${isAdmin ? "" : "hidden"}">
        <h2>Administration</h2>
        <div id="services-table"></div>
        <h3>Recipe editor</h3>
        <div id="recipe-editor"></div>
      </section>
    </div>
  `;

  const yard = new YardView(document.getElementById("yard-canvas") as HTMLCanvasElement, state);
  const missionPanel = new MissionPanel(document.getElementById("mission-panel")!, client, state);
  const adminPanel = isAdmin
    ? new AdminPanel(document.getElementById("admin-panel")!, client, () => void refreshRecipes())
    : null;

  async function refreshRecipes(): Promise<void> {
    missionPanel.setRecipes(await client.listRecipes());
  }

  let yardDirty = true;
  let missionsDirty = true;
  function frame(): void {
    if (yardDirty) {
      yard.render();
      yardDirty = false;
    }
    if (missionsDirty) {
      missionPanel.renderCards();
      missionsDirty = false;
    }
    requestAnimationFrame(frame);
  }

  const banner = document.getElementById("banner")!;
  const stream = new EventStream(
    session,
    (event: StreamEvent) => {
      const changed = state.apply(event);
      yardDirty ||= changed.yard;
      missionsDirty ||= changed.missions;
      if (changed.yard) {
        missionPanel.renderForm(); // free-agent list may have changed
      }
      if (changed.admin && adminPanel) {
        void adminPanel.refresh();
        void refreshRecipes();
      }
    },
    (connected) => banner.classList.toggle("hidden", connected),
  );
  stream.connect();

  await refreshRecipes();
  if (adminPanel) {
    await adminPanel.refresh();
  }
  missionPanel.renderCards();
  requestAnimationFrame(frame);
}

async function probeAdmin(client: GatewayClient): Promise<boolean> {
  // PUT on a nonexistent service: admins get 404, operators get 403
  try {
    await client.setServiceEnabled("__probe__", true);
    return true;
  } catch (err) {
    return err instanceof GatewayError && err.status !== 403 && err.status !== 401;
  }
}

renderLogin();
