// Document shapes of the gateway HTTP/WS API. Field names mirror the wire
// exactly (lower_snake_case); the dashboard never derives state, it only
// displays what these carry.

export interface PoseDoc {
  x: number;
  y: number;
  heading: number;
}

export interface GeometryDoc {
  length_m: number;
  width_m: number;
  turning_radius_m?: number;
}

export type AgentStatus = "free" | "ready" | "busy";

export interface AgentDoc {
  agent_uuid: string;
  name: string;
  agent_class: string;
  geometry: GeometryDoc;
  status: AgentStatus;
  pose: PoseDoc | null;
  connection: "online" | "offline";
  reserved_by: string | null;
  last_seen: number;
}

export type MissionStatus =
  | "created"
  | "reserving"
  | "planning"
  | "dispatching"
  | "executing"
  | "succeeded"
  | "failed"
  | "canceled";

export const TERMINAL_STATUSES: MissionStatus[] = ["succeeded", "failed", "canceled"];

export interface MissionDoc {
  mission_id: string;
  recipe_name: string;
  request: Record<string, unknown>;
  agent_uuids: string[];
  status: MissionStatus;
  assignments: string[];
  created_at: number;
  updated_at: number;
  failure_reason: string | null;
}

export interface MapObjectDoc {
  object_id: string;
  object_type: string;
  geometry: { x: number; y: number }[];
  metadata: Record<string, unknown>;
}

export interface YardDoc {
  revision: number;
  map_objects: MapObjectDoc[];
  agents: { agent_uuid: string; pose: PoseDoc | null; status: AgentStatus }[];
}

export interface RecipeStepDoc {
  step_id: string;
  service_name: string;
  run_order: number;
  depends_on: string[];
  apply_result: "none" | "map_write" | "assignment_source";
  timeout_override_ms?: number | null;
}

export interface RecipeDoc {
  name: string;
  description: string;
  steps: RecipeStepDoc[];
  requires_agents: boolean;
  degraded?: boolean;
  violations?: ViolationDoc[];
}

export interface ViolationDoc {
  code: string;
  message: string;
  step_id: string | null;
}

export interface ServiceDoc {
  service_name: string;
  domain: string;
  base_url: string;
  enabled: boolean;
  result_timeout_ms: number;
  poll_interval_ms: number;
  subdomain: string | null;
}

export type StreamTopic = "agent_state" | "sensors" | "mission_state" | "map";

// One /ws/events push: the body is a DomainEvent document.
export interface StreamEvent {
  topic: StreamTopic;
  ts: number;
  body: {
    event_id: string;
    kind: string;
    subject_id: string;
    ts: number;
    body: Record<string, any>;
  };
}

export interface ApiErrorDoc {
  error: string;
  [key: string]: unknown;
}
