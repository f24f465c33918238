// Thin fetch client for the gateway. Errors surface as GatewayError with the
// server's {error, ...} document attached so forms can render them inline.

import type {
  AgentDoc,
  ApiErrorDoc,
  MissionDoc,
  RecipeDoc,
  ServiceDoc,
  YardDoc,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    public status: number,
    public doc: ApiErrorDoc,
  ) {
    super(`${status}: ${doc.error}`);
  }
}

export interface Session {
  baseUrl: string;
  token: string;
}

export function wsEventsUrl(session: Session): string {
  return session.baseUrl.replace(/^http/, "ws") + "/ws/events";
}

async function request<T>(
  session: Session,
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const resp = await fetch(session.baseUrl + path, {
    method,
    headers: {
      Authorization: `Bearer ${session.token}`,
      ...(body !== undefined ? { "content-type": "application/json" } : {}),
    },
    body: body !== undefined ? JSON.stringify(body) : undefined,
  });
  let doc: any = null;
  try {
    doc = await resp.json();
  } catch {
    doc = { error: `bad response (${resp.status})` };
  }
  if (!resp.ok) {
    throw new GatewayError(resp.status, doc);
  }
  return doc as T;
}

export class GatewayClient {
  constructor(public session: Session) {}

  listAgents(): Promise<AgentDoc[]> {
    return request(this.session, "GET", "/api/agents");
  }

  listMissions(): Promise<MissionDoc[]> {
    return request(this.session, "GET", "/api/missions");
  }

  getMission(id: string): Promise<MissionDoc> {
    return request(this.session, "GET", `/api/missions/${id}`);
  }

  getMap(): Promise<YardDoc> {
    return request(this.session, "GET", "/api/map");
  }

  listRecipes(): Promise<RecipeDoc[]> {
    return request(this.session, "GET", "/api/recipes");
  }

  listServices(): Promise<ServiceDoc[]> {
    return request(this.session, "GET", "/api/services");
  }

  createMission(recipeName: string, requestDoc: unknown, agentUuids: string[]): Promise<{ mission_id: string }> {
    return request(this.session, "POST", "/api/missions", {
      recipe_name: recipeName,
      request: requestDoc,
      agent_uuids: agentUuids,
    });
  }

  cancelMission(id: string): Promise<unknown> {
    return request(this.session, "DELETE", `/api/missions/${id}`);
  }

  registerService(doc: Partial<ServiceDoc>): Promise<ServiceDoc & { api_key: string }> {
    return request(this.session, "POST", "/api/admin/services", doc);
  }

  setServiceEnabled(name: string, enabled: boolean): Promise<ServiceDoc> {
    return request(this.session, "PUT", `/api/admin/services/${name}`, { enabled });
  }

  upsertRecipe(doc: RecipeDoc): Promise<{ name: string }> {
    return request(this.session, "POST", "/api/admin/recipes", doc);
  }
}
