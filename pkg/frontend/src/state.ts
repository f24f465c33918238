// Mirror of the tower state, assembled from the REST snapshot and kept
// current by applying stream events verbatim. A page reload rebuilds the
// identical view from the gateway alone; nothing here is computed locally.

import type {
  AgentDoc,
  MapObjectDoc,
  MissionDoc,
  MissionStatus,
  PoseDoc,
  StreamEvent,
} from "./types.js";

export interface MissionTimelineEntry {
  ts: number;
  label: string;
}

export class DashboardState {
  agents = new Map<string, AgentDoc>();
  missions = new Map<string, MissionDoc>();
  mapObjects = new Map<string, MapObjectDoc>();
  revision = 0;
  timelines = new Map<string, MissionTimelineEntry[]>();

  loadSnapshot(agents: AgentDoc[], missions: MissionDoc[], yard: {
    revision: number;
    map_objects: MapObjectDoc[];
  }): void {
    this.agents = new Map(agents.map((a) => [a.agent_uuid, a]));
    this.missions = new Map(missions.map((m) => [m.mission_id, m]));
    this.mapObjects = new Map(yard.map_objects.map((o) => [o.object_id, o]));
    this.revision = yard.revision;
  }

  // Returns which parts of the view need re-rendering.
  apply(event: StreamEvent): { yard: boolean; missions: boolean; admin: boolean } {
    const { kind, body, ts } = event.body;
    switch (kind) {
      case "agent_checked_in": {
        this.agents.set(body.record.agent_uuid, body.record as AgentDoc);
        return { yard: true, missions: false, admin: false };
      }
      case "agent_status_changed": {
        const agent = this.agents.get(body.agent_uuid);
        if (agent) {
          agent.status = body.status;
          agent.connection = body.connection;
          agent.reserved_by = body.reserved_by ?? null;
        }
        return { yard: true, missions: false, admin: false };
      }
      case "sensor_received": {
        const agent = this.agents.get(body.agent_uuid);
        if (agent) {
          agent.pose = body.pose as PoseDoc;
          agent.last_seen = body.ts;
        }
        return { yard: true, missions: false, admin: false };
      }
      case "mission_created": {
        const mission = body.mission as MissionDoc;
        this.missions.set(mission.mission_id, mission);
        this.pushTimeline(mission.mission_id, ts, "created");
        return { yard: false, missions: true, admin: false };
      }
      case "mission_status_changed": {
        const mission = this.missions.get(body.mission_id);
        if (mission) {
          mission.status = body.status as MissionStatus;
          if (body.failure_reason) {
            mission.failure_reason = body.failure_reason;
          }
          mission.updated_at = ts;
        }
        this.pushTimeline(body.mission_id, ts, body.status);
        return { yard: false, missions: true, admin: false };
      }
      case "step_dispatched": {
        this.pushTimeline(body.mission_id, ts, `step ${body.step_id} → ${body.service_name}`);
        return { yard: false, missions: true, admin: false };
      }
      case "step_completed": {
        this.pushTimeline(body.mission_id, ts, `step ${body.step_result.step_id} done`);
        return { yard: false, missions: true, admin: false };
      }
      case "assignment_status_changed": {
        this.pushTimeline(
          body.mission_id,
          ts,
          `assignment ${String(body.assignment_id).slice(0, 8)} ${body.status}`,
        );
        return { yard: false, missions: true, admin: false };
      }
      case "map_updated": {
        for (const doc of body.update ?? []) {
          this.mapObjects.set(doc.object_id, doc as MapObjectDoc);
        }
        for (const objectId of body.delete ?? []) {
          this.mapObjects.delete(objectId);
        }
        this.revision = body.revision;
        return { yard: true, missions: false, admin: false };
      }
      case "service_registered":
      case "service_updated":
      case "recipe_upserted":
        return { yard: false, missions: false, admin: true };
      default:
        return { yard: false, missions: false, admin: false };
    }
  }

  private pushTimeline(missionId: string, ts: number, label: string): void {
    const entries = this.timelines.get(missionId) ?? [];
    entries.push({ ts, label });
    if (entries.length > 200) {
      entries.shift();
    }
    this.timelines.set(missionId, entries);
  }

  freeAgents(): AgentDoc[] {
    return [...this.agents.values()].filter(
      (a) => a.status === "free" && a.connection === "online" && !a.reserved_by,
    );
  }

  sortedMissions(): MissionDoc[] {
    return [...this.missions.values()].sort((a, b) => b.created_at - a.created_at);
  }
}
